// Copyright 2026 The grape-dp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// grape-dp: train, spectrum, memory and selftest subcommands.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grape/error.h"
#include "grape/harness.h"
#include "grape/memory_model.h"

namespace {

int ExitCode(grape::ErrorCode code) {
  switch (code) {
    case grape::ErrorCode::kInvalidArgument:
      return 2;
    case grape::ErrorCode::kConfiguration:
      return 3;
    case grape::ErrorCode::kCalibration:
      return 4;
    case grape::ErrorCode::kFormat:
      return 5;
    case grape::ErrorCode::kNumericFailure:
      return 6;
  }
  return 1;
}

// Named flags are applied after --set pairs so they win over both the file
// and the generic overrides.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> named;

  grape::ConfigMap Build() const {
    grape::ConfigMap map;
    if (!config_path.empty()) map = grape::LoadConfigFile(config_path);
    grape::ApplyOverrides(map, sets);
    for (const auto& [key, value] : named) {
      if (!value.empty()) map[key] = value;
    }
    return map;
  }
};

void AddConfigFlags(CLI::App* cmd, ConfigFlags& flags,
                    const std::vector<std::string>& keys) {
  cmd->add_option("--config", flags.config_path, "key=value config file");
  cmd->add_option("--set", flags.sets, "key=value override (repeatable)");
  flags.named.reserve(keys.size());
  for (const std::string& key : keys) {
    flags.named.emplace_back(key, "");
    const std::string flag = key == "rank" ? "--r,--rank" : "--" + key;
    cmd->add_option(flag, flags.named.back().second, "sets '" + key + "'");
  }
}

// Output stream for `path`, stdout when empty.
std::ostream& Open(const std::string& path, std::unique_ptr<std::ofstream>& f) {
  if (path.empty()) return std::cout;
  f = std::make_unique<std::ofstream>(path);
  if (!*f) throw grape::ConfigurationError("cannot write '" + path + "'");
  return *f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private training with random gradient "
               "projections"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "run one training experiment");
  AddConfigFlags(train, train_flags,
                 {"method", "epsilon", "delta", "sigma", "clip", "rank",
                  "refresh_every", "lr", "batch_size", "epochs", "steps",
                  "seed", "output"});

  ConfigFlags spectrum_flags;
  std::string spectrum_output;
  CLI::App* spectrum =
      app.add_subcommand("spectrum", "singular values of privatized gradients");
  AddConfigFlags(spectrum, spectrum_flags,
                 {"widths", "layers", "clips", "sigmas", "k", "batch_size",
                  "seed"});
  spectrum->add_option("--output", spectrum_output, "CSV path (stdout if unset)");

  std::string memory_method = "all";
  std::string memory_widths = "784,256,10";
  std::size_t memory_batch = 16;
  std::size_t memory_rank = 4;
  std::size_t memory_steps = 2;
  bool memory_measure = false;
  bool memory_no_bias = false;
  CLI::App* memory =
      app.add_subcommand("memory", "predicted (and measured) memory per method");
  memory->add_option("--method", memory_method,
                     "adam, galore, dp-adam, naive-dp-galore, dp-grape or all");
  memory->add_option("--spec", memory_widths, "layer widths, e.g. 784,256,10");
  memory->add_option("--batch", memory_batch, "batch size B");
  memory->add_option("--r,--rank", memory_rank, "projection rank r");
  memory->add_flag("--measure", memory_measure,
                   "also run instrumented steps and report measured peaks");
  memory->add_option("--steps", memory_steps, "steps of the measured run");
  memory->add_flag("--no-bias", memory_no_bias, "model without bias vectors");

  CLI::App* selftest = app.add_subcommand("selftest", "run property checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const grape::ExperimentConfig cfg =
          grape::ExperimentConfigFromMap(train_flags.Build());
      std::unique_ptr<std::ofstream> file;
      std::ostream& out = Open(cfg.output, file);
      const grape::RunResult result = grape::RunExperiment(cfg, out);
      for (const std::string& w : result.warnings) {
        std::cerr << "warning: " << w << '\n';
      }
      return 0;
    }
    if (spectrum->parsed()) {
      const grape::SpectrumConfig cfg =
          grape::SpectrumConfigFromMap(spectrum_flags.Build());
      std::unique_ptr<std::ofstream> file;
      std::ostream& out = Open(spectrum_output, file);
      grape::SpectrumExperiment(cfg, &out);
      return 0;
    }
    if (memory->parsed()) {
      const grape::ModelSpec spec = grape::ModelSpec::FromWidths(
          grape::ParseSizeList(memory_widths, "spec"), grape::Activation::kTanh,
          grape::Loss::kCrossEntropy, !memory_no_bias);
      std::vector<std::string> methods = {memory_method};
      if (memory_method == "all") {
        methods = {"adam", "galore", "dp-adam", "naive-dp-galore", "dp-grape"};
      }
      bool header = true;
      for (const std::string& m : methods) {
        const grape::MemoryReport predicted =
            grape::PredictMemory(m, spec, memory_batch, memory_rank);
        grape::MemoryReport measured;
        if (memory_measure) {
          measured = grape::TrackedRun(m, spec, memory_batch, memory_rank,
                                       memory_steps)
                         .measured;
        }
        grape::WriteMemoryCsv(std::cout, predicted, measured, header);
        header = false;
      }
      return 0;
    }
    if (selftest->parsed()) {
      bool all = true;
      for (const grape::SelftestResult& r : grape::RunSelftest()) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": "
                  << r.detail << '\n';
        all = all && r.passed;
      }
      return all ? 0 : 1;
    }
  } catch (const grape::Error& e) {
    std::cerr << "error (" << grape::ErrorCodeName(e.code()) << "): "
              << e.what() << '\n';
    return ExitCode(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
