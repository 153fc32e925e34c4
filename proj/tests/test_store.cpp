#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tdu/store.hpp"
#include "tdu/train/trainer.hpp"

namespace fs = std::filesystem;

namespace {

using tdu::ErrorCode;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("tdu_store_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const tdu::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::io;
}

std::string snapshot_bytes(const tdu::GradientSnapshot& s) {
  std::ostringstream out(std::ios::binary);
  tdu::write_snapshot(out, s);
  return out.str();
}

TEST(Snapshot, RoundTripIsBitExact) {
  const tdu::GradientSnapshot s{12, 3, {1.5f, -0.0f, 3.4e38f, 1e-45f, -7.25f}};
  std::istringstream in(snapshot_bytes(s));
  const auto back = tdu::read_snapshot(in);
  ASSERT_EQ(back.values.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.values[i]), std::bit_cast<std::uint32_t>(s.values[i]));
  }
  EXPECT_EQ(back.epoch, 12u);
  EXPECT_EQ(back.batch, 3u);
}

TEST(Snapshot, LittleEndianLayout) {
  const std::string b = snapshot_bytes({7, 2, {1.0f}});
  ASSERT_EQ(b.size(), 4u + 1u + 8u + 4u + 4u + 4u);
  EXPECT_EQ(b.substr(0, 4), "TDUG");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(static_cast<unsigned char>(b[5]), 1u);  // N = 1, low byte first
  EXPECT_EQ(static_cast<unsigned char>(b[13]), 7u);
  EXPECT_EQ(static_cast<unsigned char>(b[17]), 2u);
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(b[24]), 0x3fu);
  EXPECT_EQ(static_cast<unsigned char>(b[23]), 0x80u);
}

TEST(Snapshot, DistinctDiagnostics) {
  const std::string good = snapshot_bytes({1, 0, {1.0f, 2.0f, 3.0f}});
  auto read = [](std::string bytes) {
    return [bytes] {
      std::istringstream in(bytes);
      tdu::read_snapshot(in);
    };
  };
  std::string bad = good;
  bad[1] = 'X';
  EXPECT_EQ(code_of(read(bad)), ErrorCode::bad_magic);
  bad = good;
  bad[4] = 2;
  EXPECT_EQ(code_of(read(bad)), ErrorCode::bad_version);
  EXPECT_EQ(code_of(read(good.substr(0, good.size() - 1))), ErrorCode::truncated_payload);
  EXPECT_EQ(code_of(read(good.substr(0, 10))), ErrorCode::truncated_payload);
  const std::string nan = snapshot_bytes({1, 0, {1.0f, std::numeric_limits<float>::quiet_NaN()}});
  EXPECT_EQ(code_of(read(nan)), ErrorCode::non_finite_input);
}

TEST(Records, LargeRoundTrip) {
  std::vector<tdu::AvalancheRecord> recs;
  recs.reserve(1'000'000);
  tdu::Rng rng(1);
  for (std::uint32_t i = 0; i < 1'000'000; ++i) {
    recs.push_back({"run_a", 1 + i / 16, i % 16, rng.below(100000), static_cast<std::uint32_t>(rng.below(21)),
                    rng.below(2) == 1, 2.0 * rng.uniform() - 1.0});
  }
  std::stringstream buf;
  tdu::write_records(buf, recs);
  const auto back = tdu::read_records(buf);
  EXPECT_EQ(back, recs);
}

TEST(Records, Errors) {
  auto parse = [](std::string text) {
    return [text] {
      std::istringstream in(text);
      tdu::read_records(in);
    };
  };
  const std::string hdr = "run_id,epoch,batch,size,iterations,truncated,rotation_cos\n";
  EXPECT_EQ(code_of(parse(hdr + "r,2,0,5,1,0,0.5\nr,1,0,5,1,0,0.5\n")), ErrorCode::non_monotone_keys);
  EXPECT_EQ(code_of(parse(hdr + "r,1,0,5,1,0,0.5\nr,1,0,5,1,0,0.5\n")), ErrorCode::non_monotone_keys);
  EXPECT_EQ(code_of(parse("epoch,batch\n")), ErrorCode::bad_magic);
  EXPECT_EQ(code_of(parse(hdr + "r,1,0,five,1,0,0.5\n")), ErrorCode::data_integrity);
  EXPECT_EQ(code_of(parse(hdr + "r,1,0,5,1,0,nan\n")), ErrorCode::non_finite_input);
}

TEST(Trace, RoundTripAndValidation) {
  const std::vector<tdu::AccuracyPoint> trace{{5, 0.5, 0.1, 2.3}, {10, 1.0, 0.25, 0.01}, {15, 1.0, 1.0, 1e-5}};
  std::stringstream buf;
  tdu::write_trace(buf, trace);
  EXPECT_EQ(tdu::read_trace(buf), trace);

  auto parse = [](std::string text) {
    return [text] {
      std::istringstream in(text);
      tdu::read_trace(in);
    };
  };
  EXPECT_EQ(code_of(parse("epoch,train_acc,test_acc,loss\n5,0.5,0.1,1\n5,0.5,0.1,1\n")), ErrorCode::non_monotone_keys);
  EXPECT_EQ(code_of(parse("epoch,train_acc,test_acc,loss\n5,1.5,0.1,1\n")), ErrorCode::data_integrity);
}

TEST(Trace, GrokEpoch) {
  std::vector<tdu::AccuracyPoint> trace;
  for (std::uint32_t e = 5; e <= 300; e += 5) trace.push_back({e, 1.0, e >= 140 ? 0.995 : 0.4, 0.0});
  EXPECT_EQ(tdu::grok_epoch_from_trace(trace), 140u);
  for (auto& p : trace) p.test_acc = 0.99;  // must exceed, not reach
  EXPECT_FALSE(tdu::grok_epoch_from_trace(trace));
  EXPECT_EQ(tdu::grok_epoch_from_trace(trace, 0.0), 5u);
}

TEST(Manifest, JsonRoundTrip) {
  tdu::RunManifest m;
  m.run_id = "xor_h16_s3";
  m.spec = tdu::default_modadd_spec();
  m.spec.train.seed = 0xfedcba9876543210ull;
  m.spec.train.stop_after_t = 0.75;
  m.n_params = 10211;
  m.graph_build_seed = 0xffffffffffffffffull;
  m.graph_digest = 0x8000000000000001ull;
  m.grok_epoch = 140;
  m.status = tdu::RunStatus::grokked;
  m.accuracy_trace_path = "trace.csv";
  m.avalanche_record_path = "avalanches.csv";
  m.snapshot_paths = {"snapshots/epoch_000005/batch_0000.tdug"};
  const auto back = tdu::manifest_from_json(tdu::manifest_to_json(m));
  EXPECT_EQ(back.spec, m.spec);
  EXPECT_EQ(back.graph_build_seed, m.graph_build_seed);
  EXPECT_EQ(back.graph_digest, m.graph_digest);
  EXPECT_EQ(back.grok_epoch, m.grok_epoch);
  EXPECT_EQ(back.status, m.status);
  EXPECT_EQ(back.snapshot_paths, m.snapshot_paths);

  auto j = tdu::manifest_to_json(m);
  j.erase("status");
  EXPECT_EQ(code_of([&] { tdu::manifest_from_json(j); }), ErrorCode::data_integrity);
}

TEST(Manifest, MissingReferencedFileIsReported) {
  TempDir dir("refint");
  tdu::RunManifest m;
  m.run_id = "r";
  m.accuracy_trace_path = "trace.csv";
  tdu::save_manifest(dir.path(), m);
  EXPECT_EQ(code_of([&] { tdu::load_run(dir.path()); }), ErrorCode::io);
}

tdu::RunSpec snapshotting_xor() {
  auto spec = tdu::default_xor_spec();
  spec.model.hidden_width = 32;
  spec.train.seed = 4;
  spec.train.max_epochs = 60;
  spec.train.eval_every = 3;
  spec.train.snapshot_every = 1;
  return spec;
}

TEST(Ingest, ReingestedSnapshotsReproduceLiveRecords) {
  TempDir dir("reingest");
  const auto spec = snapshotting_xor();
  const auto live = tdu::train_run(spec, "live", dir.path());
  ASSERT_EQ(live.manifest.snapshot_paths.size(), 20u);

  tdu::ManifestStub stub;
  stub.run_id = "live";
  stub.seed = spec.train.seed;
  const auto ing = tdu::ingest_external_snapshots(dir.path() / tdu::kSnapshotDir, stub);
  EXPECT_EQ(ing.manifest.n_params, live.manifest.n_params);
  EXPECT_EQ(ing.manifest.status, tdu::RunStatus::unknown);
  EXPECT_FALSE(ing.manifest.grok_epoch);
  const auto graph = tdu::build_ba_graph(ing.manifest.n_params, 2, ing.manifest.graph_build_seed);
  EXPECT_EQ(tdu::graph_digest(graph), live.manifest.graph_digest);
  const auto reprobed = tdu::probe_snapshots(ing.snapshots, graph, stub.probe, "live");

  std::vector<tdu::AvalancheRecord> expected;
  for (const auto& r : live.records) {
    if (r.epoch % 3 == 0) expected.push_back(r);
  }
  EXPECT_EQ(reprobed, expected);

  const auto loaded = tdu::load_run(dir.path());
  EXPECT_EQ(loaded.records, live.records);
  EXPECT_EQ(loaded.trace, live.trace);
}

TEST(Ingest, MixedNListsOffenders) {
  TempDir dir("mixed");
  tdu::save_snapshot(dir.path() / "a.tdug", {1, 0, std::vector<float>(10, 1.0f)});
  tdu::save_snapshot(dir.path() / "b.tdug", {2, 0, std::vector<float>(10, 1.0f)});
  tdu::save_snapshot(dir.path() / "odd.tdug", {3, 0, std::vector<float>(11, 1.0f)});
  try {
    tdu::ingest_external_snapshots(dir.path(), {});
    FAIL();
  } catch (const tdu::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ingestion);
    EXPECT_NE(std::string(e.what()).find("odd.tdug"), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("a.tdug"), std::string::npos);
  }
}

TEST(Ingest, EmptyAndDuplicate) {
  TempDir dir("dup");
  EXPECT_EQ(code_of([&] { tdu::ingest_external_snapshots(dir.path(), {}); }), ErrorCode::ingestion);
  tdu::save_snapshot(dir.path() / "a.tdug", {1, 0, std::vector<float>(4, 1.0f)});
  tdu::save_snapshot(dir.path() / "sub" / "b.tdug", {1, 0, std::vector<float>(4, 2.0f)});
  EXPECT_EQ(code_of([&] { tdu::ingest_external_snapshots(dir.path(), {}); }), ErrorCode::ingestion);
}

TEST(ProbeDigest, DependsOnConfig) {
  tdu::ProbeConfig a, b;
  b.alpha = 0.4;
  EXPECT_EQ(tdu::probe_config_digest(a, 2, 1).size(), 16u);
  EXPECT_EQ(tdu::probe_config_digest(a, 2, 1), tdu::probe_config_digest(a, 2, 1));
  EXPECT_NE(tdu::probe_config_digest(a, 2, 1), tdu::probe_config_digest(b, 2, 1));
  EXPECT_NE(tdu::probe_config_digest(a, 2, 1), tdu::probe_config_digest(a, 3, 1));
}

}  // namespace
