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
#include "grape/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "grape/dp.h"
#include "grape/error.h"
#include "grape/memory_model.h"
#include "grape/projection.h"
#include "grape/rng.h"
#include "grape/svd.h"

namespace grape {
namespace {

// Stream tags for the per-purpose generators derived from a master seed.
enum SeedTag : std::uint64_t {
  kSplitTag = 1,
  kProjectorTag,
  kNoiseTag,
  kInitTag,
  kShuffleTag,
  kIterateTag,
  kSpectrumBatchTag,
  kSpectrumNoiseTag,
};

std::uint64_t Derive(std::uint64_t seed, SeedTag tag) {
  return HashWords({seed, tag});
}

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string Num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string ClipString(std::optional<double> c) {
  return c ? Num(*c) : "inf";
}

double ParseDouble(const std::string& text, const std::string& key) {
  const std::string t = Trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw ConfigurationError("key '" + key + "': expected a number, got '" +
                             text + "'");
  }
  return v;
}

std::size_t ParseSize(const std::string& text, const std::string& key) {
  const std::string t = Trim(text);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || t[0] == '-' || end != t.c_str() + t.size()) {
    throw ConfigurationError("key '" + key +
                             "': expected a non-negative integer, got '" +
                             text + "'");
  }
  return static_cast<std::size_t>(v);
}

bool ParseBool(const std::string& text, const std::string& key) {
  const std::string t = Trim(text);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw ConfigurationError("key '" + key + "': expected a boolean, got '" +
                           text + "'");
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Reads keys from a map and reports the ones nobody asked for.
class KeyReader {
 public:
  explicit KeyReader(const ConfigMap& map) : map_(map) {}

  const std::string* Get(const std::string& key) {
    used_.insert(key);
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }

  void CheckAllUsed() const {
    for (const auto& [key, value] : map_) {
      if (!used_.contains(key)) {
        throw ConfigurationError("unknown key '" + key + "'");
      }
    }
  }

 private:
  const ConfigMap& map_;
  std::set<std::string> used_;
};

template <typename T, typename Parse>
void Read(KeyReader& r, const std::string& key, T& out, Parse parse) {
  if (const std::string* v = r.Get(key)) out = parse(*v, key);
}

DatasetSource ReadDataset(KeyReader& r) {
  DatasetSource d;
  if (const std::string* v = r.Get("dataset")) d.kind = Trim(*v);
  if (d.kind != "synthetic-gaussian" && d.kind != "two-class-margin" &&
      d.kind != "idx") {
    throw ConfigurationError("key 'dataset': unknown source '" + d.kind + "'");
  }
  Read(r, "n", d.n, ParseSize);
  Read(r, "dim", d.dim, ParseSize);
  Read(r, "classes", d.classes, ParseSize);
  Read(r, "margin", d.margin, ParseDouble);
  Read(r, "data_seed", d.seed, ParseSize);
  if (const std::string* v = r.Get("idx_images")) d.idx_images = Trim(*v);
  if (const std::string* v = r.Get("idx_labels")) d.idx_labels = Trim(*v);
  return d;
}

ModelSpec ReadModel(KeyReader& r, std::size_t default_in,
                    std::size_t default_out) {
  std::vector<std::size_t> widths = {default_in, default_out};
  Activation act = Activation::kTanh;
  Loss loss = Loss::kCrossEntropy;
  bool bias = true;
  if (const std::string* v = r.Get("widths")) {
    widths = ParseSizeList(*v, "widths");
  }
  try {
    if (const std::string* v = r.Get("activation")) act = ParseActivation(Trim(*v));
    if (const std::string* v = r.Get("loss")) loss = ParseLoss(Trim(*v));
  } catch (const InvalidArgumentError& e) {
    throw ConfigurationError(e.what());
  }
  Read(r, "bias", bias, ParseBool);
  if (widths.size() < 2) {
    throw ConfigurationError("key 'widths': need at least two widths");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigurationError("key 'widths': widths must be >= 1");
  }
  return ModelSpec::FromWidths(widths, act, loss, bias);
}

// `b` distinct rows of [0, n) in random order.
std::vector<std::size_t> FirstRows(std::size_t n, std::size_t b,
                                   RngStream rng) {
  std::vector<std::size_t> p = Permutation(n, rng);
  p.resize(b);
  return p;
}

double RelativeError(const GradSet& a, const GradSet& b) {
  const std::vector<double> x = Flatten(a);
  const std::vector<double> y = Flatten(b);
  double diff = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    diff += (x[k] - y[k]) * (x[k] - y[k]);
  }
  return std::sqrt(diff) / std::max({Norm2(x), Norm2(y), 1e-12});
}

}  // namespace

std::vector<std::size_t> ParseSizeList(const std::string& text,
                                       const std::string& key) {
  std::vector<std::size_t> out;
  for (const std::string& item : SplitList(text)) {
    out.push_back(ParseSize(item, key));
  }
  return out;
}

std::optional<double> ParseClip(const std::string& text,
                                const std::string& key) {
  const std::string t = Trim(text);
  if (t == "inf" || t == "none") return std::nullopt;
  const double c = ParseDouble(t, key);
  if (!(c > 0.0)) {
    throw ConfigurationError("key '" + key + "': clip must be > 0 or inf");
  }
  return c;
}

ConfigMap ParseConfigText(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(ss, line)) {
    ++number;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || Trim(line.substr(0, eq)).empty()) {
      throw ConfigurationError("config line " + std::to_string(number) +
                               ": expected key=value");
    }
    out[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap LoadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfigText(ss.str());
}

void ApplyOverrides(ConfigMap& base, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const ConfigMap one = ParseConfigText(o);
    if (one.empty()) {
      throw ConfigurationError("override '" + o + "': expected key=value");
    }
    for (const auto& [k, v] : one) base[k] = v;
  }
}

Dataset LoadDataset(const DatasetSource& s) {
  if (s.kind == "synthetic-gaussian") {
    return SyntheticGaussian(s.n, s.dim, s.classes, s.seed);
  }
  if (s.kind == "two-class-margin") {
    return TwoClassMargin(s.n, s.dim, s.margin, s.seed);
  }
  if (s.kind == "idx") {
    if (s.idx_images.empty() || s.idx_labels.empty()) {
      throw ConfigurationError(
          "dataset 'idx' needs keys 'idx_images' and 'idx_labels'");
    }
    return LoadIdx(s.idx_images, s.idx_labels);
  }
  throw ConfigurationError("key 'dataset': unknown source '" + s.kind + "'");
}

ExperimentConfig ExperimentConfigFromMap(const ConfigMap& map) {
  KeyReader r(map);
  ExperimentConfig c;
  if (const std::string* v = r.Get("method")) {
    try {
      c.method = ParseMethod(Trim(*v));
    } catch (const InvalidArgumentError& e) {
      throw ConfigurationError(std::string("key 'method': ") + e.what());
    }
  }
  c.data = ReadDataset(r);
  c.spec = ReadModel(r, c.data.dim, 1);
  Read(r, "test_fraction", c.test_fraction, ParseDouble);

  auto opt_double = [](const std::string& v, const std::string& k) {
    return std::optional<double>(ParseDouble(v, k));
  };
  Read(r, "epsilon", c.epsilon, opt_double);
  Read(r, "delta", c.delta, opt_double);
  Read(r, "sigma", c.sigma, opt_double);
  Read(r, "clip", c.clip, ParseClip);

  Read(r, "rank", c.rank, ParseSize);
  Read(r, "refresh_every", c.refresh_every, ParseSize);
  Read(r, "reset_moments_on_refresh", c.reset_moments_on_refresh, ParseBool);
  Read(r, "lr", c.hyper.lr, ParseDouble);
  Read(r, "beta1", c.hyper.beta1, ParseDouble);
  Read(r, "beta2", c.hyper.beta2, ParseDouble);
  Read(r, "phi", c.hyper.phi, ParseDouble);
  Read(r, "batch_size", c.batch_size, ParseSize);
  Read(r, "micro_batch", c.micro_batch, ParseSize);
  Read(r, "epochs", c.epochs, ParseSize);
  auto opt_size = [](const std::string& v, const std::string& k) {
    return std::optional<std::size_t>(ParseSize(v, k));
  };
  Read(r, "steps", c.steps, opt_size);
  Read(r, "eval_every", c.eval_every, ParseSize);
  Read(r, "uniform_iterate", c.uniform_iterate, ParseBool);
  Read(r, "record_walltime", c.record_walltime, ParseBool);
  Read(r, "seed", c.seed, ParseSize);
  if (const std::string* v = r.Get("output")) c.output = Trim(*v);
  r.CheckAllUsed();

  if (c.sigma && *c.sigma < 0.0) {
    throw ConfigurationError("key 'sigma': must be >= 0");
  }
  try {
    c.hyper.Validate();
  } catch (const InvalidArgumentError& e) {
    throw ConfigurationError(e.what());
  }
  return c;
}

RunResult RunExperiment(const ExperimentConfig& cfg, std::ostream& csv) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset data = LoadDataset(cfg.data);
  auto [train, test] =
      SplitDataset(data, cfg.test_fraction, Derive(cfg.seed, kSplitTag));
  const ModelSpec& spec = cfg.spec;
  spec.Validate();
  if (spec.input_dim() != train.dim()) {
    throw ConfigurationError("key 'widths': input width " +
                             std::to_string(spec.input_dim()) +
                             " does not match dataset dimension " +
                             std::to_string(train.dim()));
  }
  const std::size_t n = train.size();
  const std::size_t b = cfg.batch_size;
  if (b == 0 || b > n) {
    throw ConfigurationError("key 'batch_size': must lie in [1, " +
                             std::to_string(n) + "]");
  }
  const std::size_t per_epoch = n / b;
  const std::size_t total = cfg.steps.value_or(cfg.epochs * per_epoch);
  if (total == 0) throw ConfigurationError("key 'steps': run has no steps");

  RunResult result;
  result.steps = total;
  const bool is_private = IsPrivate(cfg.method);
  const double delta = cfg.delta.value_or(1.0 / static_cast<double>(n));

  PrivacySpec privacy;
  privacy.clip = cfg.clip;
  privacy.delta = delta;
  privacy.steps = total;
  privacy.dataset_size = n;
  privacy.batch_size = b;
  bool calibrated = false;
  if (is_private) {
    if (cfg.sigma) {
      result.sigma = *cfg.sigma;
    } else if (cfg.epsilon) {
      privacy.epsilon = *cfg.epsilon;
      Calibration cal = CalibrateSigma(privacy);
      result.sigma = cal.sigma;
      result.warnings = std::move(cal.warnings);
      calibrated = true;
    } else {
      throw CalibrationError("method " + ToString(cfg.method) +
                             " needs key 'epsilon' or key 'sigma'");
    }
    if (result.sigma > 0.0 && !cfg.clip) {
      throw ConfigurationError(
          "key 'clip': noise requires a finite clip threshold");
    }
    privacy.sigma = result.sigma;
  }

  OptimizerConfig oc;
  oc.method = cfg.method;
  oc.hyper = cfg.hyper;
  oc.rank = cfg.rank;
  oc.refresh_every = cfg.refresh_every;
  oc.projector_seed = Derive(cfg.seed, kProjectorTag);
  oc.reset_moments_on_refresh = cfg.reset_moments_on_refresh;
  oc.dp.privacy = privacy;
  oc.dp.noise_seed = Derive(cfg.seed, kNoiseTag);
  oc.dp.micro_batch = cfg.micro_batch;
  std::unique_ptr<Optimizer> opt = MakeOptimizer(spec, oc);

  auto epsilon_at = [&](std::size_t t) {
    if (!is_private || result.sigma == 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    if (calibrated) {
      return *cfg.epsilon *
             std::sqrt(static_cast<double>(t) / static_cast<double>(total));
    }
    return EpsilonForSigma(result.sigma, t, n, delta);
  };

  csv << "# grape-dp train\n";
  csv << "# method=" << ToString(cfg.method) << " steps=" << total
      << " batch_size=" << b << " n_train=" << n << " n_eval="
      << (test.size() > 0 ? test.size() : n) << " seed=" << cfg.seed << '\n';
  if (is_private) {
    csv << "# privacy: clip=" << ClipString(cfg.clip)
        << " sigma=" << Num(result.sigma) << " epsilon_target="
        << (cfg.epsilon ? Num(*cfg.epsilon) : "none")
        << " delta=" << Num(delta) << '\n';
    csv << "# batching: each epoch visits a fresh shuffle of the training "
           "set without replacement and drops the last partial batch; the "
           "closed-form calibration treats the "
        << total << " steps as independent full-batch releases and takes "
                    "no credit for sampling\n";
  }
  for (const std::string& w : result.warnings) csv << "# warning: " << w << '\n';
  csv << "step,loss,acc,epsilon,walltime_ms\n";

  Params params = InitParams(spec, RngStream(Derive(cfg.seed, kInitTag)));
  RngStream shuffle(Derive(cfg.seed, kShuffleTag));
  const Batch train_batch = ToBatch(train, spec);
  const Batch eval_batch = test.size() > 0 ? ToBatch(test, spec) : train_batch;
  const std::size_t returned =
      cfg.method == Method::kBlockSgd
          ? ReturnedIterate(total, cfg.uniform_iterate,
                            RngStream(Derive(cfg.seed, kIterateTag)))
          : total;
  Params returned_params;

  std::vector<std::size_t> order;
  std::size_t pos = n;
  for (std::size_t t = 1; t <= total; ++t) {
    if (pos + b > n) {
      order = Permutation(n, shuffle);
      pos = 0;
    }
    const Batch batch =
        ToBatch(train, spec, std::span<const std::size_t>(order).subspan(pos, b));
    pos += b;
    opt->Step(params, batch);
    if (t == returned) returned_params = params;

    const bool due = cfg.eval_every > 0 ? t % cfg.eval_every == 0
                                        : t % per_epoch == 0;
    if (due || t == total) {
      RunRecord rec;
      rec.step = t;
      rec.loss = Evaluate(spec, params, train_batch).mean_loss;
      rec.accuracy =
          Accuracy(spec, Evaluate(spec, params, eval_batch), eval_batch);
      rec.epsilon = epsilon_at(t);
      if (cfg.record_walltime) {
        rec.walltime_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
      }
      csv << rec.step << ',' << Num(rec.loss) << ',' << Num(rec.accuracy)
          << ',' << Num(rec.epsilon) << ',' << Num(rec.walltime_ms) << '\n';
      result.records.push_back(rec);
    }
  }
  result.final_accuracy =
      Accuracy(spec, Evaluate(spec, returned_params, eval_batch), eval_batch);
  if (returned != total) {
    csv << "# returned iterate " << returned << " accuracy "
        << Num(result.final_accuracy) << '\n';
  }
  return result;
}

SpectrumConfig SpectrumConfigFromMap(const ConfigMap& map) {
  KeyReader r(map);
  SpectrumConfig c;
  c.data = ReadDataset(r);
  c.spec = ReadModel(r, c.data.dim, 2);
  c.layers = {0};
  c.clips = {std::nullopt, 1.0};
  c.sigmas = {0.0, 2.0};
  Read(r, "layers", c.layers, ParseSizeList);
  if (const std::string* v = r.Get("clips")) {
    c.clips.clear();
    for (const std::string& item : SplitList(*v)) {
      c.clips.push_back(ParseClip(item, "clips"));
    }
  }
  if (const std::string* v = r.Get("sigmas")) {
    c.sigmas.clear();
    for (const std::string& item : SplitList(*v)) {
      c.sigmas.push_back(ParseDouble(item, "sigmas"));
    }
  }
  Read(r, "k", c.k, ParseSize);
  Read(r, "batch_size", c.batch_size, ParseSize);
  Read(r, "seed", c.seed, ParseSize);
  r.CheckAllUsed();
  return c;
}

std::vector<SpectrumRow> SpectrumExperiment(const SpectrumConfig& cfg,
                                            std::ostream* csv) {
  const ModelSpec& spec = cfg.spec;
  spec.Validate();
  if (cfg.layers.empty() || cfg.clips.empty() || cfg.sigmas.empty()) {
    throw InvalidArgumentError(
        "spectrum: layers, clips and sigmas must be non-empty");
  }
  for (std::size_t l : cfg.layers) {
    if (l >= spec.num_layers()) {
      throw InvalidArgumentError("spectrum: layer " + std::to_string(l) +
                                 " does not exist");
    }
    const LayerDims& d = spec.layers[l];
    if (cfg.k == 0 || cfg.k > std::min(d.fan_in, d.fan_out)) {
      throw InvalidArgumentError(
          "spectrum: k = " + std::to_string(cfg.k) + " exceeds layer " +
          std::to_string(l) + " of shape " + std::to_string(d.fan_in) + "x" +
          std::to_string(d.fan_out));
    }
  }
  for (double s : cfg.sigmas) {
    if (s < 0.0) throw InvalidArgumentError("spectrum: sigma must be >= 0");
  }
  bool has_unclipped = false, has_clipped = false;
  for (const auto& c : cfg.clips) (c ? has_clipped : has_unclipped) = true;
  bool has_noise = false, has_noiseless = false;
  for (double s : cfg.sigmas) (s > 0.0 ? has_noise : has_noiseless) = true;
  if (!has_clipped && !has_noiseless) {
    throw ConfigurationError(
        "spectrum: sigma > 0 requires a finite clip threshold");
  }
  const Dataset data = LoadDataset(cfg.data);
  if (spec.input_dim() != data.dim()) {
    throw ConfigurationError("spectrum: input width does not match data");
  }
  if (cfg.batch_size == 0 || cfg.batch_size > data.size()) {
    throw ConfigurationError("spectrum: batch_size must lie in [1, n]");
  }

  const Params params =
      InitParams(spec, RngStream(Derive(cfg.seed, kInitTag)));
  const Batch batch = ToBatch(
      data, spec,
      FirstRows(data.size(), cfg.batch_size,
                RngStream(Derive(cfg.seed, kSpectrumBatchTag))));
  const PerSampleGrads per_sample = ComputePerSampleGrads(spec, params, batch);
  const double b = static_cast<double>(cfg.batch_size);

  if (csv) {
    *csv << "# grape-dp spectrum\n"
         << "# recipe: per-sample gradients of a freshly initialized model on "
         << cfg.batch_size << " examples; each flat per-sample gradient "
         << "clipped to norm C (skipped for C=inf), averaged over the batch, "
         << "then N(0,(C*sigma/B)^2) noise added to every coordinate\n"
         << "# s_i is the i-th singular value of each listed layer's "
         << "gradient averaged over layers; s_i_normalized averages s_i/s_1\n"
         << "# layers=";
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
      *csv << (i ? "," : "") << cfg.layers[i];
    }
    *csv << " k=" << cfg.k << " seed=" << cfg.seed << '\n';
    if (has_unclipped && has_noise) {
      *csv << "# cells with C=inf and sigma>0 are skipped: noise needs a "
           << "finite C\n";
    }
    *csv << "C,sigma,index,s_i,s_i_normalized\n";
  }

  std::vector<SpectrumRow> rows;
  for (std::size_t ci = 0; ci < cfg.clips.size(); ++ci) {
    const std::optional<double> clip = cfg.clips[ci];
    for (std::size_t si = 0; si < cfg.sigmas.size(); ++si) {
      const double sigma = cfg.sigmas[si];
      if (sigma > 0.0 && !clip) continue;
      GradSet mean = ZerosLike(per_sample.front());
      std::vector<double> sum(FlatSize(mean), 0.0);
      for (const GradSet& g : per_sample) {
        std::vector<double> flat = Flatten(g);
        ClipInPlace(flat, clip);
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += flat[k];
      }
      for (double& x : sum) x /= b;
      if (sigma > 0.0) {
        const double sd = *clip * sigma / b;
        RngStream noise(HashWords(
            {cfg.seed, kSpectrumNoiseTag, static_cast<std::uint64_t>(ci),
             static_cast<std::uint64_t>(si)}));
        for (double& x : sum) x += sd * noise.NextNormal();
      }
      Unflatten(sum, mean);

      std::vector<double> value(cfg.k, 0.0);
      std::vector<double> normalized(cfg.k, 0.0);
      for (std::size_t l : cfg.layers) {
        const std::vector<double> s = SingularValues(mean[l].weight, cfg.k);
        for (std::size_t i = 0; i < cfg.k; ++i) {
          value[i] += s[i];
          normalized[i] += s[0] > 0.0 ? s[i] / s[0] : 0.0;
        }
      }
      const double layers = static_cast<double>(cfg.layers.size());
      for (std::size_t i = 0; i < cfg.k; ++i) {
        SpectrumRow row{clip, sigma, i + 1, value[i] / layers,
                        normalized[i] / layers};
        if (csv) {
          *csv << ClipString(clip) << ',' << Num(sigma) << ',' << row.index
               << ',' << Num(row.value) << ',' << Num(row.normalized) << '\n';
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

double TailRatio(const std::vector<SpectrumRow>& rows,
                 std::optional<double> clip, double sigma, std::size_t k) {
  for (const SpectrumRow& r : rows) {
    if (r.clip == clip && r.sigma == sigma && r.index == k) {
      return r.normalized;
    }
  }
  throw InvalidArgumentError("TailRatio: no row for C=" + ClipString(clip) +
                             " sigma=" + Num(sigma) +
                             " index=" + std::to_string(k));
}

std::vector<SelftestResult> RunSelftest() {
  std::vector<SelftestResult> out;
  auto run = [&out](const std::string& name, auto body) {
    SelftestResult r{name, false, ""};
    try {
      r.detail = body(r.passed);
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    out.push_back(r);
  };

  const ModelSpec mlp = ModelSpec::FromWidths({5, 4, 3}, Activation::kTanh,
                                              Loss::kCrossEntropy, true);
  const Params params = InitParams(mlp, RngStream(7));
  const Dataset data = SyntheticGaussian(16, 5, 3, 3);
  const Batch batch = ToBatch(data, mlp);

  run("finite-difference gradients", [&](bool& ok) {
    const PerSampleGrads g = ComputePerSampleGrads(mlp, params, batch);
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      worst = std::max(worst, RelativeError(g[i], FiniteDiffGrad(
                                                      mlp, params, batch, i,
                                                      1e-5)));
    }
    ok = worst <= 1e-4;
    return "max relative error " + Num(worst);
  });

  run("closed-form calibration", [&](bool& ok) {
    PrivacySpec p;
    p.epsilon = 2.0;
    p.delta = 1e-5;
    p.steps = 100;
    p.dataset_size = 1000;
    const double s = CalibrateSigma(p).sigma;
    ok = std::abs(s - 0.0339307) <= 1e-6;
    return "sigma " + Num(s);
  });

  run("clipping bounds and idempotence", [&](bool& ok) {
    RngStream rng(11);
    ok = true;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> v(17);
      for (double& x : v) x = 5.0 * rng.NextNormal();
      const std::vector<double> once = Clip(v, 1.0);
      ok = ok && Norm2(once) <= 1.0 && Clip(once, 1.0) == once;
    }
    return std::string(ok ? "100 vectors" : "violation found");
  });

  run("noise-free DP-Adam equals Adam", [&](bool& ok) {
    OptimizerConfig a;
    a.method = Method::kAdam;
    OptimizerConfig d = a;
    d.method = Method::kDpAdam;
    d.dp.privacy.clip = std::nullopt;
    d.dp.privacy.sigma = 0.0;
    Params pa = params;
    Params pd = params;
    auto oa = MakeOptimizer(mlp, a);
    auto od = MakeOptimizer(mlp, d);
    for (int s = 0; s < 5; ++s) {
      oa->Step(pa, batch);
      od->Step(pd, batch);
    }
    const double diff = MaxAbsDiff(Flatten(AsGradSet(pa)),
                                   Flatten(AsGradSet(pd)));
    ok = diff <= 1e-9;
    return "max difference " + Num(diff);
  });

  run("replace-one sensitivity of DP-GRAPE", [&](bool& ok) {
    OptimizerConfig c;
    c.method = Method::kDpGrape;
    c.rank = 2;
    c.dp.privacy.sigma = 1.0;
    auto opt = MakeOptimizer(mlp, c);
    const double worst = SensitivityProbe(
        [&](const Batch& x) { return opt->PreNoiseSum(params, x); }, batch,
        100, RngStream(5), 1.0);
    ok = worst <= 2.0 + 1e-9;
    return "max change " + Num(worst) + " for C = 1";
  });

  run("projector second moment", [&](bool& ok) {
    const SubspaceSchedule schedule{8, 1, 3};
    std::vector<double> g(64, 0.0);
    g[0] = 1.0;
    const Matrix gm = Matrix::Column(g);
    double sq = 0.0;
    const std::size_t trials = 4000;
    for (std::size_t t = 0; t < trials; ++t) {
      const Matrix p = Projector(schedule, t, 0, 64);
      const Matrix r = Project(p, gm);
      sq += Dot(r.data(), r.data());
    }
    sq /= static_cast<double>(trials);
    ok = std::abs(sq - 1.0) <= 0.05;
    return "mean |P^T g|^2 " + Num(sq);
  });

  run("DP-GRAPE memory prediction", [&](bool& ok) {
    const ModelSpec spec = ModelSpec::FromWidths(
        {12, 10, 6}, Activation::kTanh, Loss::kCrossEntropy, false);
    const MemoryReport p = PredictMemory("dp-grape", spec, 8, 2);
    const TrackedMeasurement m = TrackedRun("dp-grape", spec, 8, 2, 2);
    ok = m.measured.gradient_floats == p.gradient_floats &&
         m.measured.optimizer_state_floats == p.optimizer_state_floats &&
         m.measured.projector_floats == p.projector_floats;
    return "gradient " + std::to_string(m.measured.gradient_floats) + "/" +
           std::to_string(p.gradient_floats) + ", state " +
           std::to_string(m.measured.optimizer_state_floats) + "/" +
           std::to_string(p.optimizer_state_floats);
  });
  return out;
}

}  // namespace grape
