// Copyright 2026 The nestedfp Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nestedfp/tensorstore.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>

#include "checksum.hpp"
#include "nestedfp/error.hpp"
#include "nestedfp/fpcodec.hpp"

namespace nestedfp {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'N', 'F', 'P', 'T'};
constexpr std::size_t kHeaderSize = 4 + 2 + 4;
constexpr std::size_t kBlobAlignment = 8;

constexpr std::size_t align_up(std::size_t n) { return (n + kBlobAlignment - 1) / kBlobAlignment * kBlobAlignment; }

std::vector<std::uint8_t> fp16_bytes(const Fp16Matrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(m.size()) * 2);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const std::uint16_t b = m.data()[i];
    out.push_back(static_cast<std::uint8_t>(b & 0xFF));
    out.push_back(static_cast<std::uint8_t>(b >> 8));
  }
  return out;
}

Fp16Matrix fp16_from_bytes(const std::uint8_t* p, std::int64_t rows, std::int64_t cols) {
  Fp16Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
  }
  return m;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::kMalformedHeader, "manifest: bad number '" + s + "'");
  }
  return j.get<double>();
}

std::optional<Storage> parse_storage(std::string_view s) {
  if (s == "NESTED") return Storage::kNested;
  if (s == "FP16_EXCEPTION") return Storage::kFp16Exception;
  return std::nullopt;
}

std::int64_t element_count(const LayerEntry& e) { return e.rows * e.cols; }

std::vector<std::uint8_t> blob_of(const Layer& layer) {
  if (const auto* nested = std::get_if<NestedTensor>(&layer.payload)) {
    std::vector<std::uint8_t> out(nested->upper.data(), nested->upper.data() + nested->upper.size());
    out.insert(out.end(), nested->lower.data(), nested->lower.data() + nested->lower.size());
    return out;
  }
  return fp16_bytes(std::get<TensorF16>(layer.payload).data);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace

std::string_view to_string(Storage s) { return s == Storage::kNested ? "NESTED" : "FP16_EXCEPTION"; }

bool operator==(const LayerStats& a, const LayerStats& b) {
  return same_bits(a.min_value, b.min_value) && same_bits(a.max_value, b.max_value) &&
         a.out_of_range_count == b.out_of_range_count;
}

std::uint32_t fp16_digest(const Fp16Matrix& data) { return internal::crc32_of(fp16_bytes(data)); }

LayerStats compute_stats(const TensorF16& t) {
  LayerStats s;
  s.min_value = std::numeric_limits<double>::quiet_NaN();
  s.max_value = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < t.data.size(); ++i) {
    const Fp16Bits x(t.data.data()[i]);
    if (!is_applicable(x)) ++s.out_of_range_count;
    const double v = decode(x);
    if (std::isnan(v)) continue;
    if (std::isnan(s.min_value) || v < s.min_value) s.min_value = v;
    if (std::isnan(s.max_value) || v > s.max_value) s.max_value = v;
  }
  return s;
}

Layer convert_layer(const TensorF16& t) {
  Layer layer;
  LayerEntry& e = layer.entry;
  e.name = t.name;
  e.gemm_class = t.gemm_class;
  e.rows = t.rows();
  e.cols = t.cols();
  e.stats = compute_stats(t);
  e.source_digest = fp16_digest(t.data);
  if (e.stats.out_of_range_count != 0) {
    e.storage = Storage::kFp16Exception;
    layer.payload = t;
    return layer;
  }
  e.storage = Storage::kNested;
  NestedTensor nested{t.name, t.gemm_class, ByteMatrix(t.rows(), t.cols()), ByteMatrix(t.rows(), t.cols())};
  for (Eigen::Index i = 0; i < t.data.size(); ++i) {
    const NestedPair p = decompose(Fp16Bits(t.data.data()[i]));
    nested.upper.data()[i] = p.upper.byte;
    nested.lower.data()[i] = p.lower.byte;
  }
  layer.payload = std::move(nested);
  return layer;
}

ModelContainer convert_model(const std::vector<TensorF16>& tensors) {
  ModelContainer model;
  model.layers.reserve(tensors.size());
  for (const auto& t : tensors) model.layers.push_back(convert_layer(t));
  return model;
}

TensorF16 reconstruct_tensor(const NestedTensor& t) {
  TensorF16 out{t.name, t.gemm_class, Fp16Matrix(t.rows(), t.cols())};
  for (Eigen::Index i = 0; i < out.data.size(); ++i) {
    out.data.data()[i] = reconstruct({UpperCode{t.upper.data()[i]}, LowerByte{t.lower.data()[i]}}).bits;
  }
  return out;
}

TensorF16 to_fp16(const Layer& layer) {
  if (const auto* nested = std::get_if<NestedTensor>(&layer.payload)) return reconstruct_tensor(*nested);
  return std::get<TensorF16>(layer.payload);
}

std::uint64_t ApplicabilityReport::exception_layers() const {
  std::uint64_t n = 0;
  for (const auto& c : per_class) n += c.total - c.applicable;
  return n;
}

ApplicabilityReport census(const ModelContainer& model) {
  ApplicabilityReport r;
  for (const auto& layer : model.layers) {
    const LayerEntry& e = layer.entry;
    auto& count = r.per_class[static_cast<std::size_t>(e.gemm_class)];
    ++count.total;
    if (e.storage == Storage::kNested) ++count.applicable;
    if (e.gemm_class != GemmClass::kOther) {
      ++r.total;
      if (e.storage == Storage::kNested) ++r.applicable;
    }
    if (!std::isnan(e.stats.min_value) && (!r.min_value || e.stats.min_value < *r.min_value)) {
      r.min_value = e.stats.min_value;
    }
    if (!std::isnan(e.stats.max_value) && (!r.max_value || e.stats.max_value > *r.max_value)) {
      r.max_value = e.stats.max_value;
    }
  }
  return r;
}

std::string format_ratio(std::uint64_t applicable, std::uint64_t total) {
  char buf[96];
  if (total == 0) {
    std::snprintf(buf, sizeof buf, "%llu/%llu (n/a)", static_cast<unsigned long long>(applicable),
                  static_cast<unsigned long long>(total));
  } else {
    const double pct = 100.0 * static_cast<double>(applicable) / static_cast<double>(total);
    std::snprintf(buf, sizeof buf, "%llu/%llu (%.1f%%)", static_cast<unsigned long long>(applicable),
                  static_cast<unsigned long long>(total), pct);
  }
  return buf;
}

ModelCheck verify_model(const ModelContainer& model) {
  ModelCheck check;
  for (const auto& layer : model.layers) {
    ++check.layers_checked;
    if (fp16_digest(to_fp16(layer).data) != layer.entry.source_digest) {
      check.mismatched_layers.push_back(layer.entry.name);
    }
  }
  return check;
}

// ---- container I/O ------------------------------------------------------

std::vector<std::uint8_t> serialize(const ModelContainer& model) {
  std::vector<std::vector<std::uint8_t>> blobs;
  json manifest = json::array();
  std::size_t offset = 0;
  for (const auto& layer : model.layers) {
    const LayerEntry& e = layer.entry;
    blobs.push_back(blob_of(layer));
    const auto& blob = blobs.back();
    manifest.push_back({
        {"name", e.name},
        {"gemm_class", to_string(e.gemm_class)},
        {"storage", to_string(e.storage)},
        {"shape", {e.rows, e.cols}},
        {"stats",
         {{"min_value", number_to_json(e.stats.min_value)},
          {"max_value", number_to_json(e.stats.max_value)},
          {"out_of_range_count", e.stats.out_of_range_count}}},
        {"source_digest", e.source_digest},
        {"blob", {{"offset", offset}, {"length", blob.size()}, {"checksum", internal::crc32_of(blob)}}},
    });
    offset = align_up(offset + blob.size());
  }
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(kHeaderSize);
  std::memcpy(out.data(), kMagic, 4);
  out[4] = static_cast<std::uint8_t>(model.version & 0xFF);
  out[5] = static_cast<std::uint8_t>(model.version >> 8);
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out[6 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  out.insert(out.end(), text.begin(), text.end());
  out.resize(align_up(out.size()), 0);
  const std::size_t blob_base = out.size();
  for (const auto& blob : blobs) {
    out.resize(align_up(out.size() - blob_base) + blob_base, 0);
    out.insert(out.end(), blob.begin(), blob.end());
  }
  return out;
}

ModelContainer deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::kMalformedHeader, "missing NFPT magic");
  }
  ModelContainer model;
  model.version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (model.version != kContainerVersion) {
    throw Error(ErrorKind::kVersionMismatch, "container version " + std::to_string(model.version) +
                                                 ", expected " + std::to_string(kContainerVersion));
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[6 + i]) << (8 * i);
  if (bytes.size() - kHeaderSize < len) throw Error(ErrorKind::kMalformedHeader, "manifest extends past end of file");
  const std::size_t blob_base = align_up(kHeaderSize + len);

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + len);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::kMalformedHeader, std::string("manifest: ") + ex.what());
  }
  if (!manifest.is_array()) throw Error(ErrorKind::kMalformedHeader, "manifest is not a JSON array");

  for (const auto& rec : manifest) {
    Layer layer;
    LayerEntry& e = layer.entry;
    std::size_t offset = 0, length = 0;
    std::uint32_t checksum = 0;
    try {
      e.name = rec.at("name").get<std::string>();
      const auto cls = parse_gemm_class(rec.at("gemm_class").get<std::string>());
      const auto storage = parse_storage(rec.at("storage").get<std::string>());
      if (!cls || !storage) throw Error(ErrorKind::kMalformedHeader, "layer '" + e.name + "': bad enum");
      e.gemm_class = *cls;
      e.storage = *storage;
      e.rows = rec.at("shape").at(0).get<std::int64_t>();
      e.cols = rec.at("shape").at(1).get<std::int64_t>();
      const auto& st = rec.at("stats");
      e.stats.min_value = number_from_json(st.at("min_value"));
      e.stats.max_value = number_from_json(st.at("max_value"));
      e.stats.out_of_range_count = st.at("out_of_range_count").get<std::uint64_t>();
      e.source_digest = rec.at("source_digest").get<std::uint32_t>();
      offset = rec.at("blob").at("offset").get<std::size_t>();
      length = rec.at("blob").at("length").get<std::size_t>();
      checksum = rec.at("blob").at("checksum").get<std::uint32_t>();
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::kMalformedHeader, std::string("manifest record: ") + ex.what());
    }
    if (e.rows < 1 || e.cols < 1) throw Error(ErrorKind::kMalformedHeader, "layer '" + e.name + "': empty shape");
    if ((e.storage == Storage::kNested) != (e.stats.out_of_range_count == 0)) {
      throw Error(ErrorKind::kMalformedHeader, "layer '" + e.name + "': storage contradicts stats");
    }
    const auto expected = static_cast<std::size_t>(element_count(e)) * 2;
    if (length != expected) {
      throw Error(ErrorKind::kMalformedHeader, "layer '" + e.name + "': blob length " + std::to_string(length) +
                                                   " does not match shape");
    }
    if (blob_base > bytes.size() || offset > bytes.size() - blob_base || length > bytes.size() - blob_base - offset) {
      throw Error(ErrorKind::kTruncatedBlob, "layer '" + e.name + "': blob is truncated");
    }
    const std::uint8_t* p = bytes.data() + blob_base + offset;
    if (internal::crc32_of({p, length}) != checksum) {
      throw Error(ErrorKind::kChecksumMismatch, "layer '" + e.name + "': blob checksum mismatch");
    }
    if (e.storage == Storage::kNested) {
      const auto n = static_cast<std::size_t>(element_count(e));
      NestedTensor t{e.name, e.gemm_class, ByteMatrix(e.rows, e.cols), ByteMatrix(e.rows, e.cols)};
      std::memcpy(t.upper.data(), p, n);
      std::memcpy(t.lower.data(), p + n, n);
      layer.payload = std::move(t);
    } else {
      layer.payload = TensorF16{e.name, e.gemm_class, fp16_from_bytes(p, e.rows, e.cols)};
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void save(const ModelContainer& model, const std::filesystem::path& path) { write_file(path, serialize(model)); }

ModelContainer load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

TensorF16 import_raw(const std::filesystem::path& path, std::int64_t rows, std::int64_t cols, GemmClass gemm_class,
                     std::string name) {
  if (rows < 1 || cols < 1) throw Error(ErrorKind::kSizeMismatch, "shape dimensions must be >= 1");
  const auto bytes = read_file(path);
  const auto expected = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) * 2;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kSizeMismatch, path.string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                                              std::to_string(expected));
  }
  if (name.empty()) name = path.stem().string();
  return TensorF16{std::move(name), gemm_class, fp16_from_bytes(bytes.data(), rows, cols)};
}

std::vector<TensorF16> load_source_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::vector<TensorF16> out;
  try {
    const json doc = json::parse(bytes.begin(), bytes.end());
    for (const auto& rec : doc.at("layers")) {
      const auto cls_name = rec.at("gemm_class").get<std::string>();
      const auto cls = parse_gemm_class(cls_name);
      if (!cls) throw Error(ErrorKind::kParse, "unknown gemm_class '" + cls_name + "'");
      std::filesystem::path file = rec.at("file").get<std::string>();
      if (file.is_relative()) file = path.parent_path() / file;
      out.push_back(import_raw(file, rec.at("shape").at(0).get<std::int64_t>(),
                               rec.at("shape").at(1).get<std::int64_t>(), *cls, rec.at("name").get<std::string>()));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::kParse, path.string() + ": " + ex.what());
  }
  return out;
}

void write_source_manifest(const std::filesystem::path& dir, const std::vector<TensorF16>& tensors) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  json layers = json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    const std::string file = "layer" + std::to_string(i) + ".f16";
    write_file(dir / file, fp16_bytes(t.data));
    layers.push_back({{"name", t.name},
                      {"gemm_class", to_string(t.gemm_class)},
                      {"shape", {t.rows(), t.cols()}},
                      {"file", file}});
  }
  const std::string text = json{{"layers", layers}}.dump(2) + "\n";
  write_file(dir / "source.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace nestedfp
