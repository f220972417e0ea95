// Copyright 2026 The NeuroLens Authors
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

#include "neurolens/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "neurolens/error.hpp"
#include "parallel.hpp"

namespace neurolens {

namespace {

constexpr double kVarSmoothing = 1e-9;
constexpr double kNormEpsilon = 1e-12;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": \"" + s + "\" is not a number");
}

}  // namespace

ReadoutModel::ReadoutModel(std::uint64_t n_neurons, std::uint32_t n_concepts,
                           std::vector<double> means, std::vector<double> variances)
    : n_neurons_(n_neurons),
      n_concepts_(n_concepts),
      means_(std::move(means)),
      variances_(std::move(variances)) {
  require(means_.size() == n_neurons * n_concepts && variances_.size() == means_.size(),
          ErrorCode::kInvalidArgument, "readout parameter shape mismatch");
  for (double v : variances_) {
    require(v > 0.0, ErrorCode::kNumerical, "readout variances must be positive");
  }
}

double ReadoutModel::score(std::span<const float> x, std::uint32_t concept_id) const {
  double s = 0.0;
  const double* mu = means_.data() + concept_id * n_neurons_;
  const double* var = variances_.data() + concept_id * n_neurons_;
  for (std::uint64_t j = 0; j < n_neurons_; ++j) {
    const double d = static_cast<double>(x[j]) - mu[j];
    s -= 0.5 * (std::log(2.0 * std::numbers::pi * var[j]) + d * d / var[j]);
  }
  return s;
}

std::vector<double> ReadoutModel::confidences(std::span<const float> x) const {
  require(x.size() == n_neurons_, ErrorCode::kInvalidArgument, "readout input width mismatch");
  std::vector<double> out(n_concepts_);
  for (std::uint32_t c = 0; c < n_concepts_; ++c) out[c] = score(x, c);
  const double top = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (auto& v : out) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

std::uint32_t ReadoutModel::predict(std::span<const float> x) const {
  require(x.size() == n_neurons_, ErrorCode::kInvalidArgument, "readout input width mismatch");
  std::uint32_t best = 0;
  double best_score = score(x, 0);
  for (std::uint32_t c = 1; c < n_concepts_; ++c) {
    const double s = score(x, c);
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

ReadoutModel train_readout(const ActivationDataset& dataset) {
  validate(dataset);
  const auto stats = compute_stats_table(dataset);
  for (std::uint32_t c = 0; c < dataset.n_concepts; ++c) {
    require(stats.at(0, c).sample_count >= 2 || dataset.n_neurons == 0,
            ErrorCode::kInvalidArgument,
            "concept " + std::to_string(c) + " needs at least 2 samples to train the readout");
  }
  // Largest per-neuron variance over all samples sets the smoothing scale.
  double max_var = 0.0;
  for (std::uint64_t j = 0; j < dataset.n_neurons; ++j) {
    double mean = 0.0;
    for (std::uint64_t s = 0; s < dataset.n_samples; ++s) mean += dataset.at(s, j);
    mean /= static_cast<double>(dataset.n_samples);
    double ss = 0.0;
    for (std::uint64_t s = 0; s < dataset.n_samples; ++s) {
      const double d = dataset.at(s, j) - mean;
      ss += d * d;
    }
    max_var = std::max(max_var, ss / static_cast<double>(dataset.n_samples));
  }
  const double epsilon = max_var > 0.0 ? kVarSmoothing * max_var : kVarSmoothing;

  std::vector<double> means(dataset.n_neurons * dataset.n_concepts);
  std::vector<double> variances(means.size());
  for (std::uint32_t c = 0; c < dataset.n_concepts; ++c) {
    for (std::uint64_t j = 0; j < dataset.n_neurons; ++j) {
      const auto& st = stats.at(j, c);
      means[c * dataset.n_neurons + j] = st.mean;
      variances[c * dataset.n_neurons + j] = st.std * st.std + epsilon;
    }
  }
  return ReadoutModel(dataset.n_neurons, dataset.n_concepts, std::move(means),
                      std::move(variances));
}

std::vector<ConceptResult> evaluate_readout(const ReadoutModel& model,
                                            const ActivationDataset& dataset,
                                            const InterventionPlan* plan, unsigned threads) {
  require(model.n_neurons() == dataset.n_neurons && model.n_concepts() == dataset.n_concepts,
          ErrorCode::kInvalidArgument, "readout geometry does not match the dataset");
  if (plan != nullptr) {
    require(plan->n_neurons == dataset.n_neurons, ErrorCode::kInvalidArgument,
            "plan geometry does not match the dataset");
  }
  std::vector<std::uint8_t> correct(dataset.n_samples, 0);
  std::vector<double> confidence(dataset.n_samples, 0.0);
  detail::parallel_for(dataset.n_samples, threads, [&](std::uint64_t s) {
    std::vector<float> x(dataset.row(s).begin(), dataset.row(s).end());
    if (plan != nullptr) apply_plan_inplace(*plan, x);
    const auto conf = model.confidences(x);
    const auto label = dataset.labels[s];
    correct[s] = model.predict(x) == label ? 1 : 0;
    confidence[s] = conf[label];
  });
  std::vector<ConceptResult> out(dataset.n_concepts);
  for (std::uint64_t s = 0; s < dataset.n_samples; ++s) {
    auto& r = out[dataset.labels[s]];
    r.accuracy += correct[s];
    r.confidence += confidence[s];
    ++r.n;
  }
  for (auto& r : out) {
    if (r.n == 0) continue;
    r.accuracy /= static_cast<double>(r.n);
    r.confidence /= static_cast<double>(r.n);
  }
  return out;
}

ErasureReport erasure_metrics(std::span<const ConceptResult> before,
                              std::span<const ConceptResult> after, std::uint32_t target) {
  require(before.size() == after.size(), ErrorCode::kInvalidArgument,
          "before/after results cover different concept sets");
  require(before.size() >= 2, ErrorCode::kInvalidArgument, "erasure metrics need k >= 2");
  require(target < before.size(), ErrorCode::kInvalidArgument, "target concept out of range");
  ErasureReport rep;
  rep.target = target;
  rep.before.assign(before.begin(), before.end());
  rep.after.assign(after.begin(), after.end());
  rep.d_acc = before[target].accuracy - after[target].accuracy;
  rep.d_conf = before[target].confidence - after[target].confidence;
  double acc_sum = 0.0;
  double conf_sum = 0.0;
  for (std::size_t c = 0; c < before.size(); ++c) {
    if (c == target) continue;
    acc_sum += before[c].accuracy - after[c].accuracy;
    conf_sum += before[c].confidence - after[c].confidence;
  }
  const double aux = static_cast<double>(before.size() - 1);
  rep.d_acc_aux = acc_sum / aux;
  rep.d_conf_aux = conf_sum / aux;
  rep.delta_acc = rep.d_acc - rep.d_acc_aux;
  rep.delta_conf = rep.d_conf - rep.d_conf_aux;
  return rep;
}

double dppl(double ppl_base, double ppl_post) {
  require(ppl_base > 0.0 && ppl_post > 0.0, ErrorCode::kInvalidArgument,
          "perplexities must be positive");
  return ppl_post - ppl_base;
}

double offtarget_distortion(const ActivationDataset& dataset, const InterventionPlan& plan,
                            unsigned threads) {
  require(dataset.n_neurons == plan.n_neurons, ErrorCode::kInvalidArgument,
          "plan geometry does not match the dataset");
  std::vector<double> ratio(dataset.n_samples, 0.0);
  detail::parallel_for(dataset.n_samples, threads, [&](std::uint64_t s) {
    if (dataset.labels[s] == plan.target) return;
    const auto x = dataset.row(s);
    const auto y = apply_plan(plan, x);
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = static_cast<double>(y[j]) - x[j];
      diff += d * d;
      norm += static_cast<double>(x[j]) * x[j];
    }
    ratio[s] = std::sqrt(diff) / std::max(std::sqrt(norm), kNormEpsilon);
  });
  double total = 0.0;
  std::uint64_t count = 0;
  for (std::uint64_t s = 0; s < dataset.n_samples; ++s) {
    if (dataset.labels[s] == plan.target) continue;
    total += ratio[s];
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

PearsonResult pearson(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), ErrorCode::kInvalidArgument, "pearson inputs differ in length");
  require(xs.size() >= 3, ErrorCode::kInvalidArgument, "pearson needs at least 3 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::kNumerical, "pearson input has zero variance");
  PearsonResult res;
  res.n = xs.size();
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = n - 2.0;
  const double one_minus = 1.0 - res.r * res.r;
  if (one_minus <= 0.0) {
    res.p_value = 0.0;
    return res;
  }
  const double t = std::abs(res.r) * std::sqrt(dof / one_minus);
  boost::math::students_t dist(dof);
  res.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
  return res;
}

std::vector<CorrelationRow> correlate_csv(const std::string& csv_text) {
  std::stringstream in(csv_text);
  std::string line;
  std::size_t line_no = 0;
  int score_col = -1, delta_col = -1, method_col = -1;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (!header_seen) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "separability_score" || fields[i] == "score") score_col = static_cast<int>(i);
        if (fields[i] == "delta_acc") delta_col = static_cast<int>(i);
        if (fields[i] == "method") method_col = static_cast<int>(i);
      }
      require(score_col >= 0 && delta_col >= 0 && method_col >= 0, ErrorCode::kFormat,
              "correlation CSV header must name separability_score, delta_acc and method");
      header_seen = true;
      continue;
    }
    const auto needed = static_cast<std::size_t>(std::max({score_col, delta_col, method_col}));
    require(fields.size() > needed, ErrorCode::kFormat,
            "line " + std::to_string(line_no) + ": too few columns");
    auto& g = groups[fields[static_cast<std::size_t>(method_col)]];
    g.first.push_back(parse_double(fields[static_cast<std::size_t>(score_col)], line_no));
    g.second.push_back(parse_double(fields[static_cast<std::size_t>(delta_col)], line_no));
  }
  require(header_seen, ErrorCode::kFormat, "correlation CSV is empty");
  std::vector<CorrelationRow> rows;
  for (const auto& [method, xy] : groups) {
    rows.push_back({method, pearson(xy.first, xy.second)});
  }
  return rows;
}

std::string to_json(const ErasureReport& rep) {
  using nlohmann::json;
  json per_concept = json::array();
  for (std::size_t c = 0; c < rep.before.size(); ++c) {
    per_concept.push_back({{"concept", c},
                           {"n", rep.before[c].n},
                           {"accuracy_before", rep.before[c].accuracy},
                           {"accuracy_after", rep.after[c].accuracy},
                           {"confidence_before", rep.before[c].confidence},
                           {"confidence_after", rep.after[c].confidence}});
  }
  json j = {
      {"target", rep.target},
      {"d_acc", rep.d_acc},
      {"d_acc_aux", rep.d_acc_aux},
      {"d_conf", rep.d_conf},
      {"d_conf_aux", rep.d_conf_aux},
      {"delta_acc", rep.delta_acc},
      {"delta_conf", rep.delta_conf},
      {"dppl", rep.dppl ? json(*rep.dppl) : json(nullptr)},
      {"distortion", rep.distortion},
      {"per_concept", per_concept},
  };
  return j.dump();
}

std::string to_json(std::span<const CorrelationRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    arr.push_back({{"method", row.method},
                   {"r", row.result.r},
                   {"p", row.result.p_value},
                   {"n", row.result.n}});
  }
  return nlohmann::json{{"correlations", arr}}.dump();
}

}  // namespace neurolens
