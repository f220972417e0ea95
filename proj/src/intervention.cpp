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

#include "neurolens/intervention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "neurolens/error.hpp"
#include "parallel.hpp"

namespace neurolens {

namespace {

std::size_t salient_count(double p, std::uint64_t n) {
  const double raw = p * static_cast<double>(n);
  const double nearest = std::round(raw);
  // 0.3 * 10 is 3.0000000000000004 in binary; treat it as 3.
  const double count = std::abs(raw - nearest) <= 1e-9 * std::max(1.0, raw) ? nearest : std::ceil(raw);
  return static_cast<std::size_t>(std::min(count, static_cast<double>(n)));
}

std::vector<std::uint64_t> intersect(const std::vector<std::uint64_t>& a,
                                     const std::vector<std::uint64_t>& b) {
  std::vector<std::uint64_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

void check_bank_geometry(const DensityBank& bank, std::uint64_t n_neurons, std::uint32_t k) {
  require(bank.n_neurons == n_neurons && bank.n_concepts == k, ErrorCode::kInvalidArgument,
          "density bank geometry (" + std::to_string(bank.n_neurons) + " neurons, " +
              std::to_string(bank.n_concepts) + " concepts) does not match the dataset");
}

}  // namespace

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::kApp: return "app";
    case Method::kAura: return "aura";
    case Method::kRange: return "range";
    case Method::kAdaptive: return "adaptive";
    case Method::kFull: return "full";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "app") return Method::kApp;
  if (lower == "aura") return Method::kAura;
  if (lower == "range") return Method::kRange;
  if (lower == "adaptive") return Method::kAdaptive;
  if (lower == "full") return Method::kFull;
  fail(ErrorCode::kInvalidArgument, "unknown method \"" + s + "\"");
}

Posterior posterior_detail(const DensityBank& bank, std::uint64_t neuron, std::uint32_t target,
                           double x) {
  require(neuron < bank.n_neurons, ErrorCode::kInvalidArgument, "neuron absent from bank");
  require(target < bank.n_concepts, ErrorCode::kInvalidArgument, "target concept out of range");
  double numerator = 0.0;
  double denominator = 0.0;
  std::uint32_t present = 0;
  for (std::uint32_t c = 0; c < bank.n_concepts; ++c) {
    const auto& d = bank.at(neuron, c);
    if (!d) continue;
    ++present;
    const double f = d->evaluate(x);
    denominator += f;
    if (c == target) numerator = f;
  }
  require(present > 0, ErrorCode::kInvalidArgument,
          "neuron " + std::to_string(neuron) + " has no densities in the bank");
  if (!bank.at(neuron, target)) return {0.0, false};
  if (denominator < kPosteriorUnderflow) return {1.0 / present, true};
  return {numerator / denominator, false};
}

double posterior(const DensityBank& bank, std::uint64_t neuron, std::uint32_t target, double x) {
  return posterior_detail(bank, neuron, target, x).value;
}

float app_value(float x, double pi, const Window& w, double mult) {
  if (!w.contains(x, mult)) return x;
  return static_cast<float>((1.0 - pi) * static_cast<double>(x));
}

double aura_alpha(double auroc) { return 2.0 * (1.0 - auroc); }

float aura_value(float x, double alpha) {
  return static_cast<float>(alpha * static_cast<double>(x));
}

float range_value(float x, const Window& w, double mult) {
  return w.contains(x, mult) ? 0.0f : x;
}

float adaptive_value(float x, const Window& w, double mult) {
  const double span = mult * std::max(w.std, kSigmaFloor);
  const double factor = std::min(1.0, std::abs(static_cast<double>(x) - w.mean) / span);
  if (factor >= 1.0) return x;
  return static_cast<float>(factor * static_cast<double>(x));
}

double auroc(std::span<const double> target_values, std::span<const double> other_values) {
  require(!target_values.empty() && !other_values.empty(), ErrorCode::kInvalidArgument,
          "auroc needs non-empty target and other samples");
  const auto n1 = target_values.size();
  const auto n2 = other_values.size();
  std::vector<std::pair<double, bool>> all;
  all.reserve(n1 + n2);
  for (double v : target_values) all.emplace_back(v, true);
  for (double v : other_values) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Midranks over tie groups; ranks are 1-based.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].second) rank_sum += midrank;
    }
    i = j;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  return u / (static_cast<double>(n1) * static_cast<double>(n2));
}

std::vector<std::uint64_t> select_salient(const ActivationDataset& dataset, std::uint32_t concept_id,
                                          double p) {
  require(p > 0.0 && p <= 1.0, ErrorCode::kInvalidArgument, "p must lie in (0, 1]");
  require(concept_id < dataset.n_concepts, ErrorCode::kInvalidArgument, "concept out of range");
  std::vector<double> means(dataset.n_neurons);
  for (std::uint64_t j = 0; j < dataset.n_neurons; ++j) {
    means[j] = concept_stats(dataset, j, concept_id).mean;
  }
  const auto count = salient_count(p, dataset.n_neurons);
  std::vector<std::uint64_t> order(dataset.n_neurons);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::uint64_t a, std::uint64_t b) {
                      return means[a] != means[b] ? means[a] > means[b] : a < b;
                    });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::uint64_t> firing_filter(const ActivationDataset& dataset, std::uint32_t concept_id,
                                         double tau) {
  require(tau >= 0.0 && tau <= 1.0, ErrorCode::kInvalidArgument, "tau must lie in [0, 1]");
  require(concept_id < dataset.n_concepts, ErrorCode::kInvalidArgument, "concept out of range");
  std::vector<std::uint64_t> out;
  for (std::uint64_t j = 0; j < dataset.n_neurons; ++j) {
    if (!dataset.is_sae() || concept_stats(dataset, j, concept_id).firing_freq >= tau) {
      out.push_back(j);
    }
  }
  return out;
}

InterventionPlan build_plan(const ActivationDataset& dataset,
                            std::shared_ptr<const DensityBank> bank, Method method,
                            std::uint32_t target, std::optional<double> p, double tau) {
  require(dataset.n_concepts >= 2, ErrorCode::kInvalidArgument,
          "concept erasure needs at least 2 concepts (dataset has " +
              std::to_string(dataset.n_concepts) + ")");
  require(target < dataset.n_concepts, ErrorCode::kInvalidArgument,
          "target concept " + std::to_string(target) + " out of range");

  InterventionPlan plan;
  plan.method = method;
  plan.target = target;
  plan.n_neurons = dataset.n_neurons;
  plan.n_concepts = dataset.n_concepts;
  plan.tau = tau;

  auto eligible = firing_filter(dataset, target, tau);
  switch (method) {
    case Method::kRange:
    case Method::kAdaptive:
    case Method::kFull:
      require(p.has_value(), ErrorCode::kInvalidArgument,
              std::string(to_string(method)) + " requires the saliency fraction p");
      plan.p = p;
      eligible = intersect(eligible, select_salient(dataset, target, *p));
      break;
    case Method::kApp:
      require(bank != nullptr, ErrorCode::kInvalidArgument, "app requires a density bank");
      check_bank_geometry(*bank, dataset.n_neurons, dataset.n_concepts);
      plan.bank = std::move(bank);
      break;
    case Method::kAura:
      break;
  }

  const auto stats = compute_stats_table(dataset);
  if (method == Method::kAura) {
    std::vector<std::uint64_t> kept;
    std::vector<double> target_values, other_values;
    for (auto j : eligible) {
      target_values.clear();
      other_values.clear();
      for (std::uint64_t s = 0; s < dataset.n_samples; ++s) {
        (dataset.labels[s] == target ? target_values : other_values).push_back(dataset.at(s, j));
      }
      const double a = auroc(target_values, other_values);
      if (a > 0.5) {
        kept.push_back(j);
        plan.aurocs.push_back(a);
        plan.alphas.push_back(aura_alpha(a));
      }
    }
    eligible = std::move(kept);
  }
  plan.neurons = std::move(eligible);
  plan.windows.reserve(plan.neurons.size());
  for (auto j : plan.neurons) {
    const auto& st = stats.at(j, target);
    plan.windows.push_back({st.mean, st.std});
  }
  return plan;
}

void apply_plan_inplace(const InterventionPlan& plan, std::span<float> x, TransformStats* stats) {
  require(x.size() == plan.n_neurons, ErrorCode::kInvalidArgument,
          "activation vector has " + std::to_string(x.size()) + " entries, plan expects " +
              std::to_string(plan.n_neurons));
  for (std::size_t i = 0; i < plan.neurons.size(); ++i) {
    const auto j = plan.neurons[i];
    float& v = x[j];
    switch (plan.method) {
      case Method::kApp: {
        if (!plan.windows[i].contains(v, plan.window_mult)) break;
        const auto post = posterior_detail(*plan.bank, j, plan.target, v);
        if (post.fallback && stats != nullptr) ++stats->posterior_fallbacks;
        v = app_value(v, post.value, plan.windows[i], plan.window_mult);
        break;
      }
      case Method::kAura:
        v = aura_value(v, plan.alphas[i]);
        break;
      case Method::kRange:
        v = range_value(v, plan.windows[i], plan.window_mult);
        break;
      case Method::kAdaptive:
        v = adaptive_value(v, plan.windows[i], plan.window_mult);
        break;
      case Method::kFull:
        v = 0.0f;
        break;
    }
  }
}

std::vector<float> apply_plan(const InterventionPlan& plan, std::span<const float> x,
                              TransformStats* stats) {
  std::vector<float> out(x.begin(), x.end());
  apply_plan_inplace(plan, out, stats);
  return out;
}

namespace {

std::vector<float> apply_checked(std::span<const float> x, const InterventionPlan& plan,
                                 Method expected) {
  require(plan.method == expected, ErrorCode::kInvalidArgument,
          std::string("expected a ") + to_string(expected) + " plan, got " + to_string(plan.method));
  return apply_plan(plan, x);
}

}  // namespace

std::vector<float> app_transform(std::span<const float> x, const InterventionPlan& plan) {
  return apply_checked(x, plan, Method::kApp);
}
std::vector<float> aura_transform(std::span<const float> x, const InterventionPlan& plan) {
  return apply_checked(x, plan, Method::kAura);
}
std::vector<float> range_transform(std::span<const float> x, const InterventionPlan& plan) {
  return apply_checked(x, plan, Method::kRange);
}
std::vector<float> adaptive_transform(std::span<const float> x, const InterventionPlan& plan) {
  return apply_checked(x, plan, Method::kAdaptive);
}
std::vector<float> full_transform(std::span<const float> x, const InterventionPlan& plan) {
  return apply_checked(x, plan, Method::kFull);
}

ActivationDataset apply_plan(const InterventionPlan& plan, const ActivationDataset& dataset,
                             unsigned threads, TransformStats* stats) {
  require(dataset.n_neurons == plan.n_neurons, ErrorCode::kInvalidArgument,
          "dataset width does not match the plan");
  ActivationDataset out = dataset;
  detail::parallel_for(out.n_samples, threads, [&](std::uint64_t s) {
    apply_plan_inplace(plan, {out.values.data() + s * out.n_neurons, out.n_neurons}, stats);
  });
  return out;
}

std::string to_json(const InterventionPlan& plan, const std::string& density_ref) {
  using nlohmann::json;
  json windows = json::array();
  for (const auto& w : plan.windows) windows.push_back({w.mean, w.std});
  json aurocs = nullptr;
  json alphas = nullptr;
  if (plan.method == Method::kAura) {
    aurocs = json::object();
    alphas = json::object();
    for (std::size_t i = 0; i < plan.neurons.size(); ++i) {
      aurocs[std::to_string(plan.neurons[i])] = plan.aurocs[i];
      alphas[std::to_string(plan.neurons[i])] = plan.alphas[i];
    }
  }
  json j = {
      {"method", to_string(plan.method)},
      {"target", plan.target},
      {"n_neurons", plan.n_neurons},
      {"n_concepts", plan.n_concepts},
      {"neurons", plan.neurons},
      {"windows", windows},
      {"params",
       {{"p", plan.p ? json(*plan.p) : json(nullptr)},
        {"tau", plan.tau},
        {"window_mult", plan.window_mult},
        {"aurocs", aurocs},
        {"alphas", alphas}}},
      {"density_cache", density_ref.empty() ? json(nullptr) : json(density_ref)},
  };
  return j.dump(2) + "\n";
}

std::string plan_density_ref(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& ref = j.at("density_cache");
    return ref.is_null() ? std::string() : ref.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("plan: ") + e.what());
  }
}

InterventionPlan plan_from_json(const std::string& text, std::shared_ptr<const DensityBank> bank) {
  InterventionPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    plan.method = method_from_string(j.at("method").get<std::string>());
    plan.target = j.at("target").get<std::uint32_t>();
    plan.n_neurons = j.at("n_neurons").get<std::uint64_t>();
    plan.n_concepts = j.at("n_concepts").get<std::uint32_t>();
    plan.neurons = j.at("neurons").get<std::vector<std::uint64_t>>();
    for (const auto& w : j.at("windows")) {
      plan.windows.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
    }
    const auto& params = j.at("params");
    if (!params.at("p").is_null()) plan.p = params.at("p").get<double>();
    plan.tau = params.at("tau").get<double>();
    plan.window_mult = params.at("window_mult").get<double>();
    if (plan.method == Method::kAura) {
      const auto& aurocs = params.at("aurocs");
      const auto& alphas = params.at("alphas");
      for (auto n : plan.neurons) {
        const auto key = std::to_string(n);
        plan.aurocs.push_back(aurocs.at(key).get<double>());
        plan.alphas.push_back(alphas.is_null() ? aura_alpha(plan.aurocs.back())
                                               : alphas.at(key).get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("plan: ") + e.what());
  }
  require(plan.windows.size() == plan.neurons.size(), ErrorCode::kFormat,
          "plan windows must parallel its neurons");
  require(plan.target < plan.n_concepts, ErrorCode::kFormat, "plan target out of range");
  require(std::is_sorted(plan.neurons.begin(), plan.neurons.end()) &&
              std::adjacent_find(plan.neurons.begin(), plan.neurons.end()) == plan.neurons.end(),
          ErrorCode::kFormat, "plan neurons must be strictly ascending");
  require(plan.neurons.empty() || plan.neurons.back() < plan.n_neurons, ErrorCode::kFormat,
          "plan neuron index out of range");
  if (plan.method == Method::kApp) {
    require(bank != nullptr, ErrorCode::kInvalidArgument, "app plan needs its density bank");
    check_bank_geometry(*bank, plan.n_neurons, plan.n_concepts);
    plan.bank = std::move(bank);
  }
  return plan;
}

}  // namespace neurolens
