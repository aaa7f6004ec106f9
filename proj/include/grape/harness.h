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
#ifndef GRAPE_HARNESS_H_
#define GRAPE_HARNESS_H_

// Experiment configuration, training runs and the gradient spectrum study.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "grape/dataset.h"
#include "grape/model.h"
#include "grape/optimizers.h"

namespace grape {

// Flat key=value settings. Blank lines and lines starting with '#' are
// ignored; later keys overwrite earlier ones.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap ParseConfigText(const std::string& text);
ConfigMap LoadConfigFile(const std::string& path);
// Applies "key=value" overrides on top of `base`.
void ApplyOverrides(ConfigMap& base, const std::vector<std::string>& overrides);

struct DatasetSource {
  std::string kind = "two-class-margin";  // or synthetic-gaussian, idx
  std::size_t n = 1024;
  std::size_t dim = 20;
  std::size_t classes = 2;
  double margin = 1.0;
  std::uint64_t seed = 1;
  std::string idx_images;
  std::string idx_labels;
};

Dataset LoadDataset(const DatasetSource& source);

struct ExperimentConfig {
  Method method = Method::kDpGrape;
  ModelSpec spec;
  DatasetSource data;
  double test_fraction = 0.25;

  // Privacy targets. sigma overrides calibration from (epsilon, delta);
  // delta defaults to 1 / n_train.
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<double> sigma;
  std::optional<double> clip = 1.0;  // "inf" disables clipping

  std::size_t rank = 4;
  std::size_t refresh_every = 100;
  bool reset_moments_on_refresh = false;
  AdamHyper hyper;
  std::size_t batch_size = 64;
  std::size_t micro_batch = 0;
  std::size_t epochs = 1;
  std::optional<std::size_t> steps;  // overrides epochs
  std::size_t eval_every = 0;        // 0: once per epoch and at the end
  bool uniform_iterate = false;      // block-sgd returns a uniform iterate
  bool record_walltime = false;
  std::uint64_t seed = 0;
  std::string output;  // empty: stdout
};

// Throws ConfigurationError naming the offending key.
ExperimentConfig ExperimentConfigFromMap(const ConfigMap& map);

struct RunRecord {
  std::size_t step = 0;
  double loss = 0.0;      // mean training loss
  double accuracy = 0.0;  // held-out accuracy (training set without split)
  double epsilon = 0.0;   // spent so far; infinite for non-private runs
  double walltime_ms = 0.0;
};

struct RunResult {
  std::vector<RunRecord> records;
  double final_accuracy = 0.0;
  double sigma = 0.0;
  std::size_t steps = 0;
  std::vector<std::string> warnings;
};

// Trains per `cfg`, writing '#' header lines and the CSV
// step,loss,acc,epsilon,walltime_ms to `csv`. Output depends only on the
// config; wall time is written as 0 unless record_walltime is set.
RunResult RunExperiment(const ExperimentConfig& cfg, std::ostream& csv);

struct SpectrumConfig {
  ModelSpec spec;
  DatasetSource data;
  std::vector<std::size_t> layers;  // layers whose spectra are averaged
  std::vector<std::optional<double>> clips;  // nullopt: no clipping
  std::vector<double> sigmas;
  std::size_t k = 32;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
};

struct SpectrumRow {
  std::optional<double> clip;
  double sigma = 0.0;
  std::size_t index = 0;  // 1-based
  double value = 0.0;       // mean over layers of s_i
  double normalized = 0.0;  // mean over layers of s_i / s_1
};

// For every (C, sigma): per-sample gradients at initialization clipped to
// norm C, averaged over the batch, plus N(0, (C sigma / B)^2) noise per
// coordinate, then the top-k singular values of each listed layer averaged
// across layers. Cells with C = inf and sigma > 0 are skipped;
// ConfigurationError if no cell remains. Writes columns
// C,sigma,index,s_i,s_i_normalized with the recipe in '#' header lines
// when `csv` is non-null.
std::vector<SpectrumRow> SpectrumExperiment(const SpectrumConfig& cfg,
                                            std::ostream* csv);

SpectrumConfig SpectrumConfigFromMap(const ConfigMap& map);

// s_k / s_1 of the rows for (clip, sigma).
double TailRatio(const std::vector<SpectrumRow>& rows,
                 std::optional<double> clip, double sigma, std::size_t k);

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Small versions of the property suites.
std::vector<SelftestResult> RunSelftest();

// Parses "20,64,2" into widths.
std::vector<std::size_t> ParseSizeList(const std::string& text,
                                       const std::string& key);
// "inf" or "none" -> nullopt.
std::optional<double> ParseClip(const std::string& text,
                                const std::string& key);

}  // namespace grape

#endif  // GRAPE_HARNESS_H_
