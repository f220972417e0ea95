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

#include "neurolens/activation_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "json.hpp"

#include "binary_io.hpp"
#include "neurolens/error.hpp"

namespace neurolens {

namespace {

constexpr char kMagic[4] = {'A', 'C', 'T', 'V'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kHeaderBytes = 4 + 4 + 8 + 8 + 4;

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".manifest.json");
}

}  // namespace

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kLabelOutOfRange: return "label out of range";
    case ErrorCode::kValidation: return "validation error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kNumerical: return "numerical failure";
  }
  return "unknown error";
}

const char* to_string(Representation r) noexcept {
  return r == Representation::kSae ? "sae" : "base";
}

Representation representation_from_string(const std::string& s) {
  if (s == "base") return Representation::kBase;
  if (s == "sae") return Representation::kSae;
  fail(ErrorCode::kValidation, "representation must be \"base\" or \"sae\", got \"" + s + "\"");
}

bool operator==(const ActivationDataset& a, const ActivationDataset& b) {
  if (a.n_samples != b.n_samples || a.n_neurons != b.n_neurons ||
      a.n_concepts != b.n_concepts || a.labels != b.labels || !(a.manifest == b.manifest) ||
      a.values.size() != b.values.size()) {
    return false;
  }
  return std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

void validate(const ActivationDataset& d) {
  require(d.n_concepts >= 1, ErrorCode::kValidation, "n_concepts must be at least 1");
  require(d.labels.size() == d.n_samples, ErrorCode::kValidation,
          "labels length must equal n_samples");
  require(d.n_neurons == 0 || d.n_samples <= std::numeric_limits<std::uint64_t>::max() / d.n_neurons,
          ErrorCode::kValidation, "n_samples x n_neurons overflows");
  require(d.values.size() == d.n_samples * d.n_neurons, ErrorCode::kValidation,
          "values must hold exactly n_samples x n_neurons entries");
  require(d.manifest.concept_names.size() == d.n_concepts, ErrorCode::kValidation,
          "concept_names length must equal n_concepts");
  std::vector<bool> seen(d.n_concepts, false);
  for (std::uint64_t s = 0; s < d.n_samples; ++s) {
    if (d.labels[s] >= d.n_concepts) {
      fail(ErrorCode::kLabelOutOfRange, "label " + std::to_string(d.labels[s]) + " at sample " +
                                            std::to_string(s) + " is not < n_concepts (" +
                                            std::to_string(d.n_concepts) + ")");
    }
    seen[d.labels[s]] = true;
  }
  for (std::uint32_t c = 0; c < d.n_concepts; ++c) {
    require(seen[c], ErrorCode::kValidation,
            "concept " + std::to_string(c) + " has no samples");
  }
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (!std::isfinite(d.values[i])) {
      fail(ErrorCode::kNonFinite, "non-finite activation at sample " +
                                      std::to_string(i / d.n_neurons) + ", neuron " +
                                      std::to_string(i % d.n_neurons));
    }
  }
}

std::uint64_t actv_size_bytes(std::uint64_t n_samples, std::uint64_t n_neurons) {
  return kHeaderBytes + 4 * n_samples + 4 * n_samples * n_neurons;
}

std::vector<std::uint8_t> encode_actv(const ActivationDataset& d) {
  validate(d);
  detail::ByteWriter w;
  w.reserve(actv_size_bytes(d.n_samples, d.n_neurons));
  w.bytes(kMagic, 4);
  w.put(kVersion);
  w.put(d.n_samples);
  w.put(d.n_neurons);
  w.put(d.n_concepts);
  for (auto label : d.labels) w.put(label);
  for (auto v : d.values) w.put(v);
  return std::move(w.buffer());
}

ActivationDataset decode_actv(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "not an ACTV file (bad magic)");
  }
  auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    fail(ErrorCode::kVersionMismatch,
         "unsupported ACTV version " + std::to_string(version) + " (expected 1)");
  }
  ActivationDataset d;
  d.n_samples = r.get<std::uint64_t>("n_samples");
  d.n_neurons = r.get<std::uint64_t>("n_neurons");
  d.n_concepts = r.get<std::uint32_t>("n_concepts");

  // Bound the payload by what is actually present before allocating.
  const std::uint64_t left = r.remaining();
  if (d.n_samples > left / 4) fail(ErrorCode::kTruncated, "truncated payload in labels");
  const std::uint64_t after_labels = left - 4 * d.n_samples;
  if (d.n_neurons != 0 && d.n_samples > after_labels / 4 / d.n_neurons) {
    fail(ErrorCode::kTruncated, "truncated payload in values matrix");
  }
  d.labels.resize(d.n_samples);
  for (auto& label : d.labels) label = r.get<std::uint32_t>("labels");
  d.values.resize(d.n_samples * d.n_neurons);
  for (auto& v : d.values) v = r.get<float>("values");
  if (r.remaining() != 0) {
    fail(ErrorCode::kFormat, std::to_string(r.remaining()) + " trailing bytes after values matrix");
  }
  return d;
}

std::string manifest_to_json(const Manifest& m) {
  nlohmann::json j = {
      {"model", m.model},
      {"layer", m.layer},
      {"hook_point", m.hook_point},
      {"representation", to_string(m.representation)},
      {"concept_names", m.concept_names},
  };
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("manifest is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::kFormat, "manifest must be a JSON object");
  Manifest m;
  try {
    m.model = j.at("model").get<std::string>();
    m.layer = j.at("layer").get<std::int64_t>();
    m.hook_point = j.at("hook_point").get<std::string>();
    m.representation = representation_from_string(j.at("representation").get<std::string>());
    m.concept_names = j.at("concept_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("manifest: ") + e.what());
  }
  return m;
}

void write_dataset(const ActivationDataset& dataset, const std::filesystem::path& path) {
  auto body = encode_actv(dataset);
  detail::write_file(path, body);
  detail::write_text(sidecar_path(path), manifest_to_json(dataset.manifest));
}

ActivationDataset load_dataset(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  auto d = decode_actv(bytes);
  const auto side = sidecar_path(path);
  require(std::filesystem::exists(side), ErrorCode::kIo,
          "missing manifest sidecar " + side.string());
  d.manifest = manifest_from_json(detail::read_text(side));
  validate(d);
  return d;
}

NeuronConceptStats concept_stats(const ActivationDataset& d, std::uint64_t neuron,
                                 std::uint32_t concept_id) {
  require(neuron < d.n_neurons, ErrorCode::kInvalidArgument, "neuron index out of range");
  require(concept_id < d.n_concepts, ErrorCode::kInvalidArgument, "concept index out of range");
  NeuronConceptStats st;
  double sum = 0.0;
  double sum_abs = 0.0;
  std::uint64_t active = 0;
  for (std::uint64_t s = 0; s < d.n_samples; ++s) {
    if (d.labels[s] != concept_id) continue;
    const double v = d.at(s, neuron);
    sum += v;
    sum_abs += std::abs(v);
    active += v > 0.0 ? 1 : 0;
    ++st.sample_count;
  }
  require(st.sample_count > 0, ErrorCode::kInvalidArgument,
          "concept " + std::to_string(concept_id) + " has no samples");
  const double n = static_cast<double>(st.sample_count);
  st.mean = sum / n;
  st.mean_abs = sum_abs / n;
  st.firing_freq = static_cast<double>(active) / n;
  double ss = 0.0;
  for (std::uint64_t s = 0; s < d.n_samples; ++s) {
    if (d.labels[s] != concept_id) continue;
    const double dev = d.at(s, neuron) - st.mean;
    ss += dev * dev;
  }
  st.std = std::sqrt(ss / n);
  return st;
}

std::vector<std::vector<std::uint64_t>> partition_by_concept(const ActivationDataset& d) {
  std::vector<std::vector<std::uint64_t>> parts(d.n_concepts);
  for (std::uint64_t s = 0; s < d.n_samples; ++s) parts[d.labels[s]].push_back(s);
  return parts;
}

StatsTable compute_stats_table(const ActivationDataset& d) {
  StatsTable table(d.n_neurons, d.n_concepts);
  const auto n_cells = d.n_neurons * d.n_concepts;
  std::vector<double> sum(n_cells, 0.0), sum_abs(n_cells, 0.0), ss(n_cells, 0.0);
  std::vector<std::uint64_t> active(n_cells, 0), count(d.n_concepts, 0);

  for (std::uint64_t s = 0; s < d.n_samples; ++s) {
    const auto c = d.labels[s];
    ++count[c];
    auto row = d.row(s);
    for (std::uint64_t j = 0; j < d.n_neurons; ++j) {
      const double v = row[j];
      const auto cell = j * d.n_concepts + c;
      sum[cell] += v;
      sum_abs[cell] += std::abs(v);
      active[cell] += v > 0.0 ? 1 : 0;
    }
  }
  for (std::uint64_t j = 0; j < d.n_neurons; ++j) {
    for (std::uint32_t c = 0; c < d.n_concepts; ++c) {
      auto& st = table.at(j, c);
      const auto cell = j * d.n_concepts + c;
      st.sample_count = count[c];
      if (count[c] == 0) continue;
      const double n = static_cast<double>(count[c]);
      st.mean = sum[cell] / n;
      st.mean_abs = sum_abs[cell] / n;
      st.firing_freq = static_cast<double>(active[cell]) / n;
    }
  }
  for (std::uint64_t s = 0; s < d.n_samples; ++s) {
    const auto c = d.labels[s];
    auto row = d.row(s);
    for (std::uint64_t j = 0; j < d.n_neurons; ++j) {
      const double dev = row[j] - table.at(j, c).mean;
      ss[j * d.n_concepts + c] += dev * dev;
    }
  }
  for (std::uint64_t j = 0; j < d.n_neurons; ++j) {
    for (std::uint32_t c = 0; c < d.n_concepts; ++c) {
      if (count[c] == 0) continue;
      table.at(j, c).std = std::sqrt(ss[j * d.n_concepts + c] / static_cast<double>(count[c]));
    }
  }
  return table;
}

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace detail
}  // namespace neurolens
