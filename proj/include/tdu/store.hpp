#pragma once

// Run directories and file formats.
//
// <run>/manifest.json                     RunManifest (see manifest_to_json)
// <run>/trace.csv                         epoch,train_acc,test_acc,loss
// <run>/avalanches.csv                    run_id,epoch,batch,size,iterations,truncated,rotation_cos
// <run>/snapshots/epoch_EEEEEE/batch_BBBB.tdug
//
// Gradient snapshot (.tdug), little-endian:
//   "TDUG" | version u8 (=1) | N u64 | epoch u32 | batch u32 | N x f32

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "tdu/binary_io.hpp"
#include "tdu/cascade.hpp"
#include "tdu/config.hpp"
#include "tdu/error.hpp"
#include "tdu/graph.hpp"

namespace tdu {

namespace fs = std::filesystem;

inline constexpr char kManifestFile[] = "manifest.json";
inline constexpr char kTraceFile[] = "trace.csv";
inline constexpr char kRecordFile[] = "avalanches.csv";
inline constexpr char kSnapshotDir[] = "snapshots";

// ---------------------------------------------------------------- snapshots

inline constexpr char kSnapshotMagic[4] = {'T', 'D', 'U', 'G'};
inline constexpr std::uint8_t kSnapshotVersion = 1;

struct GradientSnapshot {
  std::uint32_t epoch = 0;
  std::uint32_t batch = 0;
  std::vector<float> values;
  friend bool operator==(const GradientSnapshot&, const GradientSnapshot&) = default;
};

struct SnapshotHeader {
  std::uint64_t n = 0;
  std::uint32_t epoch = 0;
  std::uint32_t batch = 0;
};

inline void write_snapshot(std::ostream& out, const GradientSnapshot& s) {
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  out.put(static_cast<char>(kSnapshotVersion));
  binary::put_le<std::uint64_t>(out, s.values.size());
  binary::put_le<std::uint32_t>(out, s.epoch);
  binary::put_le<std::uint32_t>(out, s.batch);
  for (float v : s.values) binary::put_f32(out, v);
  if (!out) throw Error(ErrorCode::io, "failed writing gradient snapshot");
}

inline SnapshotHeader read_snapshot_header(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kSnapshotMagic)) {
    throw Error(ErrorCode::bad_magic, "not a gradient snapshot (magic mismatch)");
  }
  const int version = in.get();
  if (version != kSnapshotVersion) {
    throw Error(ErrorCode::bad_version, "unsupported snapshot version " + std::to_string(version));
  }
  SnapshotHeader h;
  h.n = binary::get_le<std::uint64_t>(in, "snapshot N");
  h.epoch = binary::get_le<std::uint32_t>(in, "snapshot epoch");
  h.batch = binary::get_le<std::uint32_t>(in, "snapshot batch");
  return h;
}

/// Reads the whole payload before returning; nothing partial escapes on error.
inline GradientSnapshot read_snapshot(std::istream& in) {
  const SnapshotHeader h = read_snapshot_header(in);
  if (h.n > (std::uint64_t{1} << 36)) throw Error(ErrorCode::data_integrity, "implausible snapshot length");
  std::vector<unsigned char> raw(h.n * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::truncated_payload, "snapshot payload shorter than 4*N bytes");
  }
  GradientSnapshot s;
  s.epoch = h.epoch;
  s.batch = h.batch;
  s.values.resize(h.n);
  for (std::size_t i = 0; i < h.n; ++i) {
    const std::uint32_t bits = std::uint32_t(raw[4 * i]) | (std::uint32_t(raw[4 * i + 1]) << 8) |
                               (std::uint32_t(raw[4 * i + 2]) << 16) | (std::uint32_t(raw[4 * i + 3]) << 24);
    const float v = std::bit_cast<float>(bits);
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "snapshot value " + std::to_string(i) + " is not finite");
    s.values[i] = v;
  }
  return s;
}

inline void save_snapshot(const fs::path& path, const GradientSnapshot& s) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string());
  write_snapshot(out, s);
}

inline GradientSnapshot load_snapshot(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return read_snapshot(in);
}

inline std::string snapshot_relpath(std::uint32_t epoch, std::uint32_t batch) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s/epoch_%06u/batch_%04u.tdug", kSnapshotDir, epoch, batch);
  return buf;
}

// ---------------------------------------------------------------- csv helpers

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_field(std::string_view s, const char* what, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::data_integrity,
                std::string("cannot parse ") + what + " '" + std::string(s) + "' on line " + std::to_string(line_no));
  }
  return value;
}

inline void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

// ---------------------------------------------------------------- avalanche records

inline constexpr std::string_view kRecordHeader = "run_id,epoch,batch,size,iterations,truncated,rotation_cos";

inline void write_records(std::ostream& out, std::span<const AvalancheRecord> records) {
  std::string buf;
  buf.reserve(64 * std::min<std::size_t>(records.size(), 1 << 16) + 64);
  buf.append(kRecordHeader);
  buf.push_back('\n');
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.run_id.find_first_of(",\n\r") != std::string::npos) {
      throw Error(ErrorCode::invalid_argument, "run_id must not contain commas or newlines");
    }
    if (i > 0 && std::pair(r.epoch, r.batch) <= std::pair(records[i - 1].epoch, records[i - 1].batch)) {
      throw Error(ErrorCode::non_monotone_keys, "records must be strictly increasing in (epoch, batch)");
    }
    buf.append(r.run_id).push_back(',');
    buf.append(std::to_string(r.epoch)).push_back(',');
    buf.append(std::to_string(r.batch)).push_back(',');
    buf.append(std::to_string(r.size)).push_back(',');
    buf.append(std::to_string(r.iterations)).push_back(',');
    buf.push_back(r.truncated ? '1' : '0');
    buf.push_back(',');
    detail::append_double(buf, r.rotation_cos);
    buf.push_back('\n');
    if (buf.size() > (1 << 22)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing avalanche records");
}

inline std::vector<AvalancheRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::data_integrity, "empty avalanche record file");
  detail::strip_cr(line);
  if (line != kRecordHeader) throw Error(ErrorCode::bad_magic, "unexpected avalanche record header '" + line + "'");
  std::vector<AvalancheRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw Error(ErrorCode::data_integrity, "expected 7 fields on line " + std::to_string(line_no));
    AvalancheRecord r;
    r.run_id = std::string(f[0]);
    r.epoch = detail::parse_field<std::uint32_t>(f[1], "epoch", line_no);
    r.batch = detail::parse_field<std::uint32_t>(f[2], "batch", line_no);
    r.size = detail::parse_field<std::uint64_t>(f[3], "size", line_no);
    r.iterations = detail::parse_field<std::uint32_t>(f[4], "iterations", line_no);
    if (f[5] != "0" && f[5] != "1") throw Error(ErrorCode::data_integrity, "truncated flag must be 0/1 on line " + std::to_string(line_no));
    r.truncated = f[5] == "1";
    r.rotation_cos = detail::parse_field<double>(f[6], "rotation_cos", line_no);
    if (!std::isfinite(r.rotation_cos)) throw Error(ErrorCode::non_finite_input, "non-finite rotation_cos on line " + std::to_string(line_no));
    if (!out.empty() && std::pair(r.epoch, r.batch) <= std::pair(out.back().epoch, out.back().batch)) {
      throw Error(ErrorCode::non_monotone_keys, "(epoch, batch) not strictly increasing at line " + std::to_string(line_no));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void save_records(const fs::path& path, std::span<const AvalancheRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string());
  write_records(out, records);
}

inline std::vector<AvalancheRecord> load_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return read_records(in);
}

// ---------------------------------------------------------------- accuracy trace

inline constexpr std::string_view kTraceHeader = "epoch,train_acc,test_acc,loss";

inline void write_trace(std::ostream& out, std::span<const AccuracyPoint> trace) {
  std::string buf(kTraceHeader);
  buf.push_back('\n');
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& p = trace[i];
    if (i > 0 && p.epoch <= trace[i - 1].epoch) throw Error(ErrorCode::non_monotone_keys, "trace epochs must increase strictly");
    buf.append(std::to_string(p.epoch)).push_back(',');
    detail::append_double(buf, p.train_acc);
    buf.push_back(',');
    detail::append_double(buf, p.test_acc);
    buf.push_back(',');
    detail::append_double(buf, p.loss);
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing accuracy trace");
}

inline std::vector<AccuracyPoint> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::data_integrity, "empty accuracy trace");
  detail::strip_cr(line);
  if (line != kTraceHeader) throw Error(ErrorCode::bad_magic, "unexpected accuracy trace header '" + line + "'");
  std::vector<AccuracyPoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 4) throw Error(ErrorCode::data_integrity, "expected 4 fields on line " + std::to_string(line_no));
    AccuracyPoint p;
    p.epoch = detail::parse_field<std::uint32_t>(f[0], "epoch", line_no);
    p.train_acc = detail::parse_field<double>(f[1], "train_acc", line_no);
    p.test_acc = detail::parse_field<double>(f[2], "test_acc", line_no);
    p.loss = detail::parse_field<double>(f[3], "loss", line_no);
    if (!(p.train_acc >= 0.0 && p.train_acc <= 1.0 && p.test_acc >= 0.0 && p.test_acc <= 1.0)) {
      throw Error(ErrorCode::data_integrity, "accuracy outside [0, 1] on line " + std::to_string(line_no));
    }
    if (!out.empty() && p.epoch <= out.back().epoch) {
      throw Error(ErrorCode::non_monotone_keys, "trace epochs not strictly increasing at line " + std::to_string(line_no));
    }
    out.push_back(p);
  }
  return out;
}

inline void save_trace(const fs::path& path, std::span<const AccuracyPoint> trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string());
  write_trace(out, trace);
}

inline std::vector<AccuracyPoint> load_trace(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return read_trace(in);
}

/// Smallest recorded epoch whose test accuracy exceeds `threshold`.
inline std::optional<std::uint32_t> grok_epoch_from_trace(std::span<const AccuracyPoint> trace, double threshold = 0.99) {
  for (const auto& p : trace) {
    if (p.test_acc > threshold) return p.epoch;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- manifest
//
// Required keys: run_id, kind, n_params, status, graph{attach_m, build_seed, digest}.
// Optional keys: grok_epoch, failure, task, model, train, paths{trace, records, snapshots}.
// 64-bit seeds and digests are stored as decimal strings.

using nlohmann::json;

inline json probe_to_json(const ProbeConfig& c) {
  return {{"alpha", c.alpha}, {"threshold_percentile", c.threshold_percentile}, {"max_iterations", c.max_iterations}};
}

inline ProbeConfig probe_from_json(const json& j, ProbeConfig c = {}) {
  c.alpha = j.value("alpha", c.alpha);
  c.threshold_percentile = j.value("threshold_percentile", c.threshold_percentile);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  return c;
}

namespace detail {
inline std::uint64_t u64_from_json(const json& j) {
  if (j.is_string()) return std::stoull(j.get<std::string>());
  return j.get<std::uint64_t>();
}
}  // namespace detail

inline json run_spec_to_json(const RunSpec& s) {
  json j;
  j["task"] = {{"kind", to_string(s.task.kind)},
               {"p", s.task.p},
               {"train_fraction", s.task.train_fraction},
               {"split_seed", std::to_string(s.task.split_seed)}};
  j["model"] = {{"d_model", s.model.d_model},         {"n_heads", s.model.n_heads},
                {"n_layers", s.model.n_layers},       {"ff_multiplier", s.model.ff_multiplier},
                {"hidden_width", s.model.hidden_width}, {"activation", to_string(s.model.activation)},
                {"init_scale", s.model.init_scale}};
  const auto& t = s.train;
  j["train"] = {{"optimizer",
                 {{"kind", to_string(t.optimizer.kind)},
                  {"lr", t.optimizer.lr},
                  {"weight_decay", t.optimizer.weight_decay},
                  {"beta1", t.optimizer.beta1},
                  {"beta2", t.optimizer.beta2},
                  {"eps", t.optimizer.eps},
                  {"decoupled_decay", t.optimizer.decoupled_decay}}},
                {"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"eval_every", t.eval_every},
                {"seed", std::to_string(t.seed)},
                {"probe_mode", to_string(t.probe_mode)},
                {"probe", probe_to_json(t.probe)},
                {"attach_m", t.attach_m},
                {"grok_threshold", t.grok_threshold},
                {"snapshot_every", t.snapshot_every}};
  if (t.stop_after_t) j["train"]["stop_after_t"] = *t.stop_after_t;
  return j;
}

/// Overlays keys present in `j` onto `s`; absent keys keep their values.
inline RunSpec run_spec_from_json(const json& j, RunSpec s) {
  if (j.contains("task")) {
    const auto& t = j["task"];
    if (t.contains("kind")) s.task.kind = parse_task_kind(t["kind"].get<std::string>());
    s.task.p = t.value("p", s.task.p);
    s.task.train_fraction = t.value("train_fraction", s.task.train_fraction);
    if (t.contains("split_seed")) s.task.split_seed = detail::u64_from_json(t["split_seed"]);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    s.model.d_model = m.value("d_model", s.model.d_model);
    s.model.n_heads = m.value("n_heads", s.model.n_heads);
    s.model.n_layers = m.value("n_layers", s.model.n_layers);
    s.model.ff_multiplier = m.value("ff_multiplier", s.model.ff_multiplier);
    s.model.hidden_width = m.value("hidden_width", s.model.hidden_width);
    if (m.contains("activation")) s.model.activation = parse_activation(m["activation"].get<std::string>());
    s.model.init_scale = m.value("init_scale", s.model.init_scale);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    auto& c = s.train;
    if (t.contains("optimizer")) {
      const auto& o = t["optimizer"];
      if (o.contains("kind")) c.optimizer.kind = parse_optimizer(o["kind"].get<std::string>());
      c.optimizer.lr = o.value("lr", c.optimizer.lr);
      c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
      c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
      c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
      c.optimizer.eps = o.value("eps", c.optimizer.eps);
      c.optimizer.decoupled_decay = o.value("decoupled_decay", c.optimizer.decoupled_decay);
    }
    c.batch_size = t.value("batch_size", c.batch_size);
    c.max_epochs = t.value("max_epochs", c.max_epochs);
    c.eval_every = t.value("eval_every", c.eval_every);
    if (t.contains("seed")) c.seed = detail::u64_from_json(t["seed"]);
    if (t.contains("probe_mode")) c.probe_mode = parse_probe_mode(t["probe_mode"].get<std::string>());
    if (t.contains("probe")) c.probe = probe_from_json(t["probe"], c.probe);
    c.attach_m = t.value("attach_m", c.attach_m);
    c.grok_threshold = t.value("grok_threshold", c.grok_threshold);
    c.snapshot_every = t.value("snapshot_every", c.snapshot_every);
    if (t.contains("stop_after_t")) {
      if (t["stop_after_t"].is_null()) c.stop_after_t.reset();
      else c.stop_after_t = t["stop_after_t"].get<double>();
    }
  }
  return s;
}

inline json manifest_to_json(const RunManifest& m) {
  json j = run_spec_to_json(m.spec);
  j["run_id"] = m.run_id;
  j["kind"] = m.kind;
  j["n_params"] = m.n_params;
  j["graph"] = {{"attach_m", m.graph_attach_m},
                {"build_seed", std::to_string(m.graph_build_seed)},
                {"digest", std::to_string(m.graph_digest)}};
  j["status"] = to_string(m.status);
  if (m.grok_epoch) j["grok_epoch"] = *m.grok_epoch;
  else j["grok_epoch"] = nullptr;
  if (!m.failure.empty()) j["failure"] = m.failure;
  j["paths"] = {{"trace", m.accuracy_trace_path}, {"records", m.avalanche_record_path}, {"snapshots", m.snapshot_paths}};
  return j;
}

inline RunManifest manifest_from_json(const json& j) {
  for (const char* key : {"run_id", "kind", "n_params", "status", "graph"}) {
    if (!j.contains(key)) throw Error(ErrorCode::data_integrity, std::string("manifest missing required key '") + key + "'");
  }
  RunManifest m;
  m.run_id = j["run_id"].get<std::string>();
  m.kind = j["kind"].get<std::string>();
  m.spec = run_spec_from_json(j, RunSpec{});
  m.n_params = j["n_params"].get<std::uint64_t>();
  m.graph_attach_m = j["graph"].value("attach_m", std::uint64_t{2});
  m.graph_build_seed = detail::u64_from_json(j["graph"]["build_seed"]);
  m.graph_digest = j["graph"].contains("digest") ? detail::u64_from_json(j["graph"]["digest"]) : 0;
  m.status = parse_run_status(j["status"].get<std::string>());
  if (j.contains("grok_epoch") && !j["grok_epoch"].is_null()) m.grok_epoch = j["grok_epoch"].get<std::uint32_t>();
  m.failure = j.value("failure", std::string{});
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    m.accuracy_trace_path = p.value("trace", std::string{});
    m.avalanche_record_path = p.value("records", std::string{});
    if (p.contains("snapshots")) m.snapshot_paths = p["snapshots"].get<std::vector<std::string>>();
  }
  return m;
}

inline void save_manifest(const fs::path& run_dir, const RunManifest& m) {
  fs::create_directories(run_dir);
  const fs::path tmp = run_dir / (std::string(kManifestFile) + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::io, "cannot open " + tmp.string());
    out << manifest_to_json(m).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::io, "failed writing manifest");
  }
  fs::rename(tmp, run_dir / kManifestFile);
}

inline RunManifest load_manifest(const fs::path& run_dir) {
  const fs::path path = run_dir / kManifestFile;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "no manifest at " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::data_integrity, "malformed manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

// ---------------------------------------------------------------- run directories

struct RunData {
  fs::path dir;
  RunManifest manifest;
  std::vector<AccuracyPoint> trace;
  std::vector<AvalancheRecord> records;
};

/// Loads a run directory and checks that every path named in the manifest
/// exists and parses. `records_file` overrides the manifest's record path.
inline RunData load_run(const fs::path& dir, const std::string& records_file = {}) {
  RunData d;
  d.dir = dir;
  d.manifest = load_manifest(dir);
  if (!d.manifest.accuracy_trace_path.empty()) d.trace = load_trace(dir / d.manifest.accuracy_trace_path);
  const std::string rec = records_file.empty() ? d.manifest.avalanche_record_path : records_file;
  if (!rec.empty()) d.records = load_records(dir / rec);
  for (const auto& sp : d.manifest.snapshot_paths) {
    std::ifstream in(dir / sp, std::ios::binary);
    if (!in) throw Error(ErrorCode::data_integrity, "manifest references missing snapshot " + sp);
    const auto h = read_snapshot_header(in);
    if (h.n != d.manifest.n_params) throw Error(ErrorCode::data_integrity, "snapshot " + sp + " has N != n_params");
  }
  return d;
}

/// Expands a list of run directories or parent directories (one level) into
/// the run directories that contain a manifest, sorted by path.
inline std::vector<fs::path> discover_runs(std::span<const std::string> roots) {
  std::vector<fs::path> out;
  for (const auto& r : roots) {
    const fs::path p(r);
    if (fs::exists(p / kManifestFile)) {
      out.push_back(p);
      continue;
    }
    if (!fs::is_directory(p)) throw Error(ErrorCode::io, "not a run directory: " + r);
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_directory() && fs::exists(e.path() / kManifestFile)) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------- ingestion

struct ManifestStub {
  std::string run_id = "ingested";
  std::optional<std::uint32_t> grok_epoch;
  std::uint64_t seed = 0;          // graph seed is graph_seed_for_run(seed) unless build_seed is given
  std::optional<std::uint64_t> build_seed;
  std::uint64_t attach_m = 2;
  ProbeConfig probe;
};

struct IngestResult {
  RunManifest manifest;
  std::vector<fs::path> snapshots;  // sorted by (epoch, batch)
};

/// Scans `dir` recursively for *.tdug files and builds a manifest for them.
inline IngestResult ingest_external_snapshots(const fs::path& dir, const ManifestStub& stub) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::ingestion, "not a directory: " + dir.string());
  struct Entry {
    fs::path path;
    SnapshotHeader h;
  };
  std::vector<Entry> entries;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".tdug") continue;
    std::ifstream in(e.path(), std::ios::binary);
    entries.push_back({e.path(), read_snapshot_header(in)});
  }
  if (entries.empty()) throw Error(ErrorCode::ingestion, "no .tdug snapshots under " + dir.string());
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.h.epoch, a.h.batch, a.path) < std::tie(b.h.epoch, b.h.batch, b.path);
  });

  std::map<std::uint64_t, std::size_t> n_counts;
  for (const auto& e : entries) ++n_counts[e.h.n];
  if (n_counts.size() > 1) {
    auto majority = std::max_element(n_counts.begin(), n_counts.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; })->first;
    std::string msg = "inconsistent N across snapshots (majority N=" + std::to_string(majority) + "); offenders:";
    for (const auto& e : entries) {
      if (e.h.n != majority) msg += " " + e.path.string() + " (N=" + std::to_string(e.h.n) + ")";
    }
    throw Error(ErrorCode::ingestion, msg);
  }
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].h.epoch == entries[i - 1].h.epoch && entries[i].h.batch == entries[i - 1].h.batch) {
      throw Error(ErrorCode::ingestion, "duplicate (epoch, batch) in " + entries[i - 1].path.string() + " and " +
                                            entries[i].path.string());
    }
  }

  IngestResult res;
  auto& m = res.manifest;
  m.run_id = stub.run_id;
  m.kind = "ingested";
  m.n_params = entries.front().h.n;
  m.graph_attach_m = stub.attach_m;
  m.graph_build_seed = stub.build_seed.value_or(graph_seed_for_run(stub.seed));
  m.grok_epoch = stub.grok_epoch;
  m.status = RunStatus::unknown;
  m.spec.train.seed = stub.seed;
  m.spec.train.attach_m = stub.attach_m;
  m.spec.train.probe = stub.probe;
  for (const auto& e : entries) res.snapshots.push_back(e.path);
  return res;
}

/// Probes each snapshot (widened to double) on `graph`, one record per file.
inline std::vector<AvalancheRecord> probe_snapshots(std::span<const fs::path> snapshots, const ParamGraph& graph,
                                                    const ProbeConfig& cfg, const std::string& run_id) {
  std::vector<AvalancheRecord> out;
  out.reserve(snapshots.size());
  std::vector<double> grad;
  for (const auto& path : snapshots) {
    const GradientSnapshot s = load_snapshot(path);
    if (s.values.size() != graph.n_nodes) {
      throw Error(ErrorCode::dimension_mismatch, path.string() + " has N=" + std::to_string(s.values.size()) +
                                                     " but graph has " + std::to_string(graph.n_nodes));
    }
    grad.assign(s.values.begin(), s.values.end());
    const CascadeResult c = probe_gradient(grad, graph, cfg);
    out.push_back({run_id, s.epoch, s.batch, c.size, c.iterations_used, c.truncated, c.rotation_cos});
  }
  return out;
}

/// Short hex digest naming a probe configuration (record file suffix).
inline std::string probe_config_digest(const ProbeConfig& cfg, std::uint64_t attach_m, std::uint64_t build_seed) {
  binary::Fnv1a64 h;
  h.add_f64(cfg.alpha);
  h.add_f64(cfg.threshold_percentile);
  h.add_u64(cfg.max_iterations);
  h.add_u64(attach_m);
  h.add_u64(build_seed);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.value()));
  return buf;
}

}  // namespace tdu
