// Copyright 2026 The photongun Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "photongun/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  namespace pc = photongun::cli;
  CLI::App app{"photongun: photon statistics of a pulsed single-dipole source"};
  app.require_subcommand(1, 1);

  pc::Command cmd;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;

  const std::vector<std::pair<const char*, const char*>> modes = {
      {"analyze", "closed forms next to the propagator at one operating point"},
      {"sweep", "CSV sweep of one parameter or a figure preset"},
      {"mc", "Monte Carlo estimates against the propagator"},
      {"attack", "photon-number-splitting attack figures"},
      {"validate", "JSON report of cross-checks; nonzero exit on failure"},
  };
  for (const auto& [name, help] : modes) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Monte Carlo seed (overrides the config)");
    sub->add_option("--out", out, "output file (default: stdout)");
    sub->add_flag("--deshelve-in-pulse-only", cmd.deshelve_in_pulse_only,
                  "apply r_d only while the pump is on");
    if (std::string(name) == "sweep") {
      sub->add_option("--preset", cmd.preset, "figure preset")
          ->check(CLI::IsMember({"fig2", "fig3", "fig4"}));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pc::kExitConfig;
  }

  cmd.mode = *pc::parse_mode(app.get_subcommands().front()->get_name());
  if (!config.empty()) cmd.config_path = config;
  if (app.get_subcommands().front()->count("--seed")) cmd.seed = seed;
  if (!out.empty()) cmd.out_path = out;
  return pc::run_command(cmd, std::cout, std::cerr);
}
