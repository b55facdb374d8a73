// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dmha/config.hpp"
#include "dmha/dataset.hpp"
#include "dmha/io.hpp"
#include "dmha/rng.hpp"

using dmha::Checkpoint;
using dmha::ManifestEntry;
using dmha::read_checkpoint;
using dmha::read_features;
using dmha::read_manifest;
using dmha::read_wav;
using dmha::RngStream;
using dmha::RunConfig;
using dmha::TensorF;
using dmha::Waveform;
using dmha::write_checkpoint;
using dmha::write_features;
using dmha::write_manifest;
using dmha::write_wav;

namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory per test, removed on teardown.
class ScopedDir {
 public:
  ScopedDir() {
    static int counter = 0;
    dir_ = fs::temp_directory_path() /
           ("dmha-io-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  ~ScopedDir() { fs::remove_all(dir_); }
  std::string operator/(const std::string& name) const { return (dir_ / name).string(); }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  f << text;
}

void corrupt_byte(const std::string& path, std::streamoff off, char value) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(off);
  f.put(value);
}

void chop_file(const std::string& path, std::streamoff keep) {
  fs::resize_file(path, uintmax_t(keep));
}

void append_bytes(const std::string& path, const std::string& extra) {
  std::ofstream f(path, std::ios::app | std::ios::binary);
  f << extra;
}

TensorF::Ptr random3(std::vector<int> dims, uint64_t seed) {
  RngStream rng(seed);
  auto t = TensorF::zeros(std::move(dims));
  for (auto& x : t->data) x = float(rng.normal());
  return t;
}

}  // namespace

TEST(Wav, RoundTripWithinQuantization) {
  ScopedDir dir;
  RngStream rng(1);
  Waveform w(3000);
  for (auto& x : w) x = float(rng.uniform(-0.9, 0.9));
  const auto path = dir / "tone.wav";
  write_wav(path, w);
  const auto back = read_wav(path);
  ASSERT_EQ(back.size(), w.size());
  // write scales by 32767, read divides by 32768: systematic shrink of
  // |w|/32768 plus half a quantization step
  for (size_t i = 0; i < w.size(); i += 7) EXPECT_NEAR(back[i], w[i], 1.0 / 16384.0);
}

TEST(Wav, RateMismatchAndGarbageAreRejected) {
  ScopedDir dir;
  const auto path = dir / "a.wav";
  write_wav(path, Waveform(100, 0.1f), 16000);
  EXPECT_THROW(read_wav(path, 8000), std::runtime_error);
  const auto junk = dir / "junk.wav";
  write_text(junk, "definitely not audio");
  EXPECT_THROW(read_wav(junk), std::runtime_error);
  EXPECT_THROW(read_wav(dir / "missing.wav"), std::runtime_error);
}

TEST(Features, RoundTripIsBitExact) {
  ScopedDir dir;
  const auto t = random3({2, 5, 7}, 2);
  const auto path = dir / "feat.dmhf";
  write_features(path, *t);
  const auto back = read_features(path);
  EXPECT_EQ(back->dims, t->dims);
  EXPECT_EQ(back->data, t->data);  // bitwise float equality
}

TEST(Features, MalformedFilesAreRejected) {
  ScopedDir dir;
  const auto t = random3({1, 3, 4}, 3);
  const auto path = dir / "feat.dmhf";

  write_features(path, *t);
  corrupt_byte(path, 0, 'X');
  EXPECT_THROW(read_features(path), std::runtime_error);

  write_features(path, *t);
  chop_file(path, std::streamoff(fs::file_size(path)) - 10);
  EXPECT_THROW(read_features(path), std::runtime_error);

  write_features(path, *t);
  append_bytes(path, "ruin");
  EXPECT_THROW(read_features(path), std::runtime_error);

  TensorF rank2;
  rank2.dims = {3, 4};
  rank2.data.assign(12, 0.0f);
  EXPECT_THROW(write_features(dir / "bad.dmhf", rank2), std::invalid_argument);
}

TEST(Checkpoints, RoundTripPreservesEverything) {
  ScopedDir dir;
  Checkpoint ckpt;
  ckpt.tensors.emplace_back("vec", random3({5}, 4));
  ckpt.tensors.emplace_back("mat", random3({3, 4}, 5));
  ckpt.tensors.emplace_back("cube", random3({2, 3, 4}, 6));
  ckpt.metadata = {{"epoch", 3},
                   {"val_macro_f1", 0.875},
                   {"nested", {{"list", {1, 2, 3}}, {"name", "abc"}}}};
  const auto path = dir / "model.dmhc";
  write_checkpoint(path, ckpt);
  const auto back = read_checkpoint(path);

  ASSERT_EQ(back.tensors.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.tensors[i].first, ckpt.tensors[i].first);
    EXPECT_EQ(back.tensors[i].second->dims, ckpt.tensors[i].second->dims);
    EXPECT_EQ(back.tensors[i].second->data, ckpt.tensors[i].second->data);
  }
  EXPECT_EQ(back.metadata, ckpt.metadata);
  EXPECT_EQ(back.tensor("mat")->dims, (std::vector<int>{3, 4}));
  EXPECT_THROW(back.tensor("nope"), std::runtime_error);
}

TEST(Checkpoints, MalformedFilesAreRejected) {
  ScopedDir dir;
  Checkpoint ckpt;
  ckpt.tensors.emplace_back("w", random3({4, 4}, 7));
  ckpt.metadata = {{"k", 1}};
  const auto path = dir / "m.dmhc";

  write_checkpoint(path, ckpt);
  corrupt_byte(path, 2, 'Z');
  EXPECT_THROW(read_checkpoint(path), std::runtime_error);

  write_checkpoint(path, ckpt);
  chop_file(path, std::streamoff(fs::file_size(path)) - 3);
  EXPECT_THROW(read_checkpoint(path), std::runtime_error);

  write_checkpoint(path, ckpt);
  append_bytes(path, "x");
  EXPECT_THROW(read_checkpoint(path), std::runtime_error);

  // structurally valid container whose metadata is not JSON
  std::ofstream f(dir / "broken.dmhc", std::ios::binary);
  f.write("DMHC", 4);
  const uint16_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 2);
  const uint32_t count = 0;
  f.write(reinterpret_cast<const char*>(&count), 4);
  const uint64_t meta_len = 2;
  f.write(reinterpret_cast<const char*>(&meta_len), 8);
  f.write("{(", 2);
  f.close();
  try {
    read_checkpoint(dir / "broken.dmhc");
    FAIL() << "expected metadata parse failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("not valid JSON"), std::string::npos) << e.what();
  }
}

TEST(Manifests, RoundTripResolvesRelativePaths) {
  ScopedDir dir;
  write_features(dir / "a.dmhf", *random3({1, 2, 3}, 8));
  write_features(dir / "a_text.dmhf", *random3({1, 2, 3}, 9));
  write_wav(dir / "b.wav", Waveform(500, 0.1f));

  std::vector<ManifestEntry> entries(2);
  entries[0].id = "utt-a";
  entries[0].acoustic_path = "a.dmhf";
  entries[0].text_path = "a_text.dmhf";
  entries[0].label = 2;
  entries[1].id = "utt-b";
  entries[1].wav_path = "b.wav";
  entries[1].label = 7;
  const auto path = dir / "data.jsonl";
  write_manifest(path, entries);

  const auto back = read_manifest(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "utt-a");
  EXPECT_EQ(back[0].label, 2);
  EXPECT_EQ(back[0].acoustic_path, dir / "a.dmhf");  // resolved against the manifest dir
  EXPECT_EQ(back[0].text_path, dir / "a_text.dmhf");
  EXPECT_TRUE(back[0].wav_path.empty());
  EXPECT_EQ(back[1].label, 7);
  EXPECT_EQ(back[1].wav_path, dir / "b.wav");
}

TEST(Manifests, AcceptsNamesAndIndicesAsLabels) {
  ScopedDir dir;
  write_wav(dir / "x.wav", Waveform(100, 0.1f));
  const auto path = dir / "m.jsonl";
  write_text(path,
             "{\"id\":\"u1\",\"wav_path\":\"x.wav\",\"label\":\"anger\"}\n"
             "\n"
             "{\"id\":\"u2\",\"wav_path\":\"x.wav\",\"label\":5}\n");
  const auto rows = read_manifest(path);
  ASSERT_EQ(rows.size(), 2u);  // blank line skipped
  EXPECT_EQ(rows[0].label, 0);
  EXPECT_EQ(rows[1].label, 5);
}

TEST(Manifests, RejectsBadRows) {
  ScopedDir dir;
  write_wav(dir / "x.wav", Waveform(100, 0.1f));
  const auto path = dir / "m.jsonl";
  auto expect_error = [&](const std::string& body, const std::string& needle) {
    write_text(path, body);
    try {
      read_manifest(path);
      FAIL() << "expected error containing '" << needle << "' for: " << body;
    } catch (const std::runtime_error& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };

  expect_error("{\"id\":\"a\",\"wav_path\":\"x.wav\",\"label\":0}\n"
               "{\"id\":\"a\",\"wav_path\":\"x.wav\",\"label\":1}\n",
               "duplicate utterance id");
  expect_error("{\"id\":\"a\",\"wav_path\":\"x.wav\",\"label\":0,\"speaker\":\"s1\"}\n",
               "unknown manifest key 'speaker'");
  expect_error("{\"id\":\"a\",\"wav_path\":\"gone.wav\",\"label\":0}\n", "referenced file missing");
  expect_error("{\"id\":\"a\",\"wav_path\":\"x.wav\",\"label\":9}\n", "label out of range");
  expect_error("{\"id\":\"a\",\"wav_path\":\"x.wav\",\"label\":1.5}\n", "class name or index");
  expect_error("{\"id\":\"a\",\"label\":0}\n", "acoustic_path or wav_path");
  expect_error("{\"id\":\"a\",\"wav_path\":\"x.wav\"}\n", "need id and label");
  expect_error("not json at all\n", "bad JSON");
  expect_error("\n\n", "manifest has no rows");
  // line numbers appear in the message
  write_text(path, "{\"id\":\"a\",\"wav_path\":\"x.wav\",\"label\":0}\nboom\n");
  try {
    read_manifest(path);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Config, DefaultsSurviveARoundTrip) {
  const RunConfig def;
  const auto c = dmha::config_from_json(dmha::config_to_json(def));
  EXPECT_EQ(c.seed, def.seed);
  EXPECT_EQ(c.model.variant, def.model.variant);
  EXPECT_EQ(c.model.heads, def.model.heads);
  EXPECT_EQ(c.model.dim, def.model.dim);
  EXPECT_EQ(c.model.hidden_width, def.model.hidden_width);
  EXPECT_EQ(c.model.hidden_layers, def.model.hidden_layers);
  EXPECT_DOUBLE_EQ(c.model.dropout, def.model.dropout);
  EXPECT_EQ(c.train.batch_size, def.train.batch_size);
  EXPECT_EQ(c.train.max_epochs, def.train.max_epochs);
  EXPECT_DOUBLE_EQ(c.train.initial_lr, def.train.initial_lr);
  EXPECT_DOUBLE_EQ(c.train.lr_decay, def.train.lr_decay);
  EXPECT_EQ(c.train.decay_patience, def.train.decay_patience);
  EXPECT_EQ(c.train.early_stop_patience, def.train.early_stop_patience);
  EXPECT_EQ(c.train.loss, def.train.loss);
  EXPECT_DOUBLE_EQ(c.train.gamma, def.train.gamma);
  EXPECT_DOUBLE_EQ(c.train.weight_decay, def.train.weight_decay);
  EXPECT_DOUBLE_EQ(c.augment.apply_prob, def.augment.apply_prob);
  EXPECT_DOUBLE_EQ(c.augment.window_seconds, def.augment.window_seconds);
  EXPECT_EQ(c.augment.speed_factors, def.augment.speed_factors);
  EXPECT_DOUBLE_EQ(c.augment.snr_low_db, def.augment.snr_low_db);
  EXPECT_DOUBLE_EQ(c.augment.snr_high_db, def.augment.snr_high_db);
  EXPECT_EQ(c.data.sample_rate, def.data.sample_rate);
  EXPECT_EQ(c.data.n_mels, def.data.n_mels);
  EXPECT_EQ(c.data.synth.per_class, def.data.synth.per_class);
  EXPECT_DOUBLE_EQ(c.data.synth.sigma, def.data.synth.sigma);
}

TEST(Config, UnknownKeysAreReportedWithTheirPath) {
  auto expect_error = [](const nlohmann::json& j, const std::string& needle) {
    try {
      dmha::config_from_json(j);
      FAIL() << "expected error containing '" << needle << "'";
    } catch (const std::runtime_error& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error({{"trian", {}}}, "trian is not a recognized key");
  expect_error({{"train", {{"lr", 0.1}}}}, "train.lr is not a recognized key");
  expect_error({{"model", {{"classes", 8}}}}, "model.classes is not a recognized key");
  expect_error({{"model", {{"feature_layers", 2}}}}, "model.feature_layers");
  expect_error({{"data", {{"synth", {{"bogus", 1}}}}}}, "data.synth.bogus");
  expect_error({{"train", {{"seed", 1}}}}, "train.seed");  // seed lives at the top level
}

TEST(Config, TypeErrorsAreReportedWithTheirPath) {
  auto expect_error = [](const nlohmann::json& j, const std::string& needle) {
    try {
      dmha::config_from_json(j);
      FAIL() << "expected error containing '" << needle << "'";
    } catch (const std::exception& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error({{"seed", -1}}, "seed must be a non-negative integer");
  expect_error({{"model", {{"heads", "two"}}}}, "model.heads must be an integer");
  expect_error({{"model", {{"dropout", "none"}}}}, "model.dropout must be a number");
  expect_error({{"augment", {{"snr_db", {1.0}}}}}, "must be [low, high]");
  expect_error({{"augment", {{"speed_factors", {"fast"}}}}},
               "augment.speed_factors must be an array of numbers");
  expect_error({{"train", 3}}, "train must be an object");
  expect_error({{"model", {{"variant", "tri-head"}}}}, "tri-head");
}

TEST(Config, PartialOverridesKeepOtherDefaults) {
  const nlohmann::json j = {
      {"seed", 7},
      {"model", {{"variant", "subvector"}, {"dim", 16}, {"heads", 4}}},
      {"train", {{"initial_lr", 0.001}, {"loss", "focal"}}},
  };
  const auto c = dmha::config_from_json(j);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);  // the run seed feeds training
  EXPECT_EQ(c.model.variant, dmha::AttentionVariant::subvector);
  EXPECT_EQ(c.model.dim, 16);
  EXPECT_EQ(c.model.heads, 4);
  EXPECT_DOUBLE_EQ(c.train.initial_lr, 0.001);
  EXPECT_EQ(c.train.loss, dmha::LossKind::focal);
  EXPECT_EQ(c.train.batch_size, 32);      // untouched default
  EXPECT_EQ(c.model.hidden_width, 512);   // untouched default
  EXPECT_DOUBLE_EQ(c.augment.apply_prob, 0.5);
}

TEST(Config, InvalidCombinationsFailValidation) {
  // subvector heads must divide dim
  const nlohmann::json j = {{"model", {{"variant", "subvector"}, {"dim", 10}, {"heads", 4}}}};
  EXPECT_THROW(dmha::config_from_json(j), std::invalid_argument);
}

TEST(Config, LoadsFromDiskAndReportsBadJson) {
  ScopedDir dir;
  const auto good = dir / "run.json";
  write_text(good, "{\"seed\": 9, \"train\": {\"max_epochs\": 2}}");
  const auto c = dmha::load_config(good);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.max_epochs, 2);

  const auto bad = dir / "broken.json";
  write_text(bad, "{nope");
  try {
    dmha::load_config(bad);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("not valid JSON"), std::string::npos) << e.what();
  }
  EXPECT_THROW(dmha::load_config(dir / "absent.json"), std::runtime_error);
}

TEST(Config, ModelRebuildsFromCheckpointMetadata) {
  dmha::ModelConfig m;
  m.variant = dmha::AttentionVariant::subvector;
  m.dim = 64;
  m.heads = 8;
  m.feature_layers = 5;
  const auto j = dmha::model_to_json(m);
  const auto back = dmha::model_from_json(j, 5);
  EXPECT_EQ(back.variant, m.variant);
  EXPECT_EQ(back.dim, 64);
  EXPECT_EQ(back.heads, 8);
  EXPECT_EQ(back.feature_layers, 5);
}

TEST(Datasets, FeatureManifestLoadsAndChecksConsistency) {
  ScopedDir dir;
  write_features(dir / "a.dmhf", *random3({2, 4, 6}, 10));
  write_features(dir / "a_text.dmhf", *random3({1, 3, 6}, 11));
  write_features(dir / "b.dmhf", *random3({2, 5, 6}, 12));
  write_text(dir / "m.jsonl",
             "{\"id\":\"a\",\"acoustic_path\":\"a.dmhf\",\"text_path\":\"a_text.dmhf\","
             "\"label\":\"happiness\"}\n"
             "{\"id\":\"b\",\"acoustic_path\":\"b.dmhf\",\"label\":3}\n");
  const auto ds = dmha::load_feature_records(dir / "m.jsonl");
  ASSERT_EQ(ds.records.size(), 2u);
  EXPECT_EQ(ds.layers, 2);
  EXPECT_EQ(ds.dim, 6);
  EXPECT_EQ(ds.class_counts[1], 1);
  EXPECT_EQ(ds.class_counts[3], 1);
  EXPECT_EQ(ds.records[0].text->dims, (std::vector<int>{3, 6}));  // [1 x T x D] flattened
  EXPECT_EQ(ds.records[1].text->dims, (std::vector<int>{0, 6}));

  // dim mismatch across records
  write_features(dir / "c.dmhf", *random3({2, 4, 7}, 13));
  write_text(dir / "bad.jsonl",
             "{\"id\":\"a\",\"acoustic_path\":\"a.dmhf\",\"label\":0}\n"
             "{\"id\":\"c\",\"acoustic_path\":\"c.dmhf\",\"label\":1}\n");
  EXPECT_THROW(dmha::load_feature_records(dir / "bad.jsonl"), std::runtime_error);

  // multi-layer text is rejected
  write_features(dir / "t2.dmhf", *random3({2, 3, 6}, 14));
  write_text(dir / "bad2.jsonl",
             "{\"id\":\"a\",\"acoustic_path\":\"a.dmhf\",\"text_path\":\"t2.dmhf\",\"label\":0}\n");
  EXPECT_THROW(dmha::load_feature_records(dir / "bad2.jsonl"), std::runtime_error);

  // wav-only rows cannot feed the feature loader
  write_wav(dir / "w.wav", Waveform(500, 0.1f));
  write_text(dir / "bad3.jsonl", "{\"id\":\"a\",\"wav_path\":\"w.wav\",\"label\":0}\n");
  EXPECT_THROW(dmha::load_feature_records(dir / "bad3.jsonl"), std::runtime_error);
}

TEST(Datasets, WavProviderIsDeterministicPerEpoch) {
  ScopedDir dir;
  RngStream rng(20);
  for (const char* name : {"u1.wav", "u2.wav"}) {
    Waveform w(24000);
    for (auto& x : w) x = float(0.3 * rng.normal() + 0.05);
    write_wav(dir / name, w);
  }
  write_text(dir / "m.jsonl",
             "{\"id\":\"u1\",\"wav_path\":\"u1.wav\",\"label\":0}\n"
             "{\"id\":\"u2\",\"wav_path\":\"u2.wav\",\"label\":4}\n");
  auto ds = std::make_shared<dmha::WavDataset>(dmha::load_wav_dataset(dir / "m.jsonl", 16000));
  EXPECT_EQ(ds->class_counts[0], 1);
  EXPECT_EQ(ds->class_counts[4], 1);

  dmha::AugmentPolicy policy;
  policy.rir_pool = {Waveform{1.0f}};
  policy.noise_pool = {Waveform(100, 0.05f)};

  auto eval = dmha::wav_provider(ds, policy, ds->stats, 40, 16000, 5, false);
  const auto r1 = eval.get(0, 1);
  const auto r2 = eval.get(0, 2);
  EXPECT_EQ(r1.id, "u1");
  EXPECT_EQ(r1.label, 0);
  ASSERT_EQ(r1.acoustic->rank(), 3);
  EXPECT_EQ(r1.acoustic->dims[0], 1);
  EXPECT_EQ(r1.acoustic->dims[2], 40);
  EXPECT_EQ(r1.text->dims, (std::vector<int>{0, 40}));
  EXPECT_EQ(r1.acoustic->data, r2.acoustic->data);  // eval ignores the epoch

  auto train = dmha::wav_provider(ds, policy, ds->stats, 40, 16000, 5, true);
  const auto t1 = train.get(0, 1);
  const auto t1_again = train.get(0, 1);
  const auto t2 = train.get(0, 2);
  EXPECT_EQ(t1.acoustic->data, t1_again.acoustic->data);  // same epoch, same noise
  EXPECT_NE(t1.acoustic->data, t2.acoustic->data);        // new epoch, new augmentation
  // training always crops to the 5.5 s window: 1 + (88000 - 400) / 160 frames
  EXPECT_EQ(t1.acoustic->dims[1], 548);
}
