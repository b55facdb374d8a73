// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: dataset synthesis, feature extraction, waveform
// augmentation, training, threshold tuning, evaluation, prediction, and a
// gradient self-check. Structured results go to stdout as JSON; errors are a
// single JSON object on stderr with exit code 1.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dmha/dmha.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace dmha;

namespace {

// ---- shared helpers -------------------------------------------------------

json load_json_file(const std::string& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(std::string("cannot open ") + what + " " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string(what) + " " + path + " is not valid JSON: " + e.what());
  }
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

bool manifest_is_wav(const std::string& path) {
  const auto entries = read_manifest(path);
  return entries.front().acoustic_path.empty();
}

/// Rank-2 text features written as a single-layer rank-3 stack.
void write_text_features(const std::string& path, const TensorF& t) {
  TensorF stack;
  stack.dims = {1, t.dims[0], t.dims[1]};
  stack.data = t.data;
  write_features(path, stack);
}

json wave_stats_json(const WaveStats& s) { return {{"mean", s.mean}, {"stdev", s.stdev}}; }

WaveStats wave_stats_from(const json& j) {
  WaveStats s;
  s.mean = j.at("mean").get<double>();
  s.stdev = j.at("stdev").get<double>();
  return s;
}

// ---- checkpoint-backed models ----------------------------------------------

struct LoadedModel {
  Checkpoint ckpt;
  ModelConfig cfg;
  std::unique_ptr<DmhaModel> model;
  ThresholdSet thresholds;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel lm;
  lm.ckpt = read_checkpoint(path);
  const auto& meta = lm.ckpt.metadata;
  if (!meta.contains("model") || !meta.contains("feature_layers"))
    throw std::runtime_error(path + ": checkpoint metadata lacks the model description");
  lm.cfg = model_from_json(meta.at("model"), meta.at("feature_layers").get<int>());
  lm.model = std::make_unique<DmhaModel>(lm.cfg, 1);
  lm.model->load_state(lm.ckpt.tensors);
  if (meta.contains("thresholds")) {
    const auto v = meta.at("thresholds").get<std::vector<double>>();
    if (v.size() != size_t(kNumClasses))
      throw std::runtime_error(path + ": thresholds must have one entry per class");
    for (int k = 0; k < kNumClasses; ++k) lm.thresholds.t[size_t(k)] = v[size_t(k)];
    lm.thresholds.validate();
  }
  return lm;
}

struct Members {
  std::vector<LoadedModel> models;
  int tie_breaker = 0;
};

Members load_members(const std::string& model_path, const std::string& ensemble_path) {
  Members ms;
  if (ensemble_path.empty()) {
    if (model_path.empty()) throw std::runtime_error("pass --model or --ensemble");
    ms.models.push_back(load_model(model_path));
    return ms;
  }
  const json spec = load_json_file(ensemble_path, "ensemble spec");
  if (!spec.is_object() || !spec.contains("members") || !spec.at("members").is_array() ||
      spec.at("members").size() != 3)
    throw std::runtime_error(ensemble_path + ": ensemble spec needs a members list of 3 paths");
  const auto base = fs::path(ensemble_path).parent_path();
  for (const auto& m : spec.at("members")) {
    if (!m.is_string()) throw std::runtime_error(ensemble_path + ": member paths must be strings");
    fs::path p(m.get<std::string>());
    ms.models.push_back(load_model(p.is_absolute() ? p.string() : (base / p).string()));
  }
  for (size_t i = 1; i < 3; ++i) {
    if (ms.models[i].ckpt.metadata.at("data") != ms.models[0].ckpt.metadata.at("data") ||
        ms.models[i].ckpt.metadata.value("wave_stats", json()) !=
            ms.models[0].ckpt.metadata.value("wave_stats", json()))
      throw std::runtime_error(ensemble_path + ": members disagree on data settings");
  }
  if (spec.contains("tie_breaker")) {
    if (!spec.at("tie_breaker").is_number_integer())
      throw std::runtime_error(ensemble_path + ": tie_breaker must be a member index");
    ms.tie_breaker = spec.at("tie_breaker").get<int>();
    if (ms.tie_breaker < 0 || ms.tie_breaker > 2)
      throw std::runtime_error(ensemble_path + ": tie_breaker must be 0, 1, or 2");
  } else {
    // best stored validation score decides; ties go to the lowest index
    double best = -1.0;
    for (int i = 0; i < 3; ++i) {
      const double f1 = ms.models[size_t(i)].ckpt.metadata.value("val_macro_f1", 0.0);
      if (f1 > best) {
        best = f1;
        ms.tie_breaker = i;
      }
    }
  }
  return ms;
}

/// Materializes evaluation records for a manifest using the data settings a
/// checkpoint was trained with. No augmentation is applied.
std::vector<FeatureRecord> eval_records(const std::string& manifest, const LoadedModel& lm) {
  const auto& meta = lm.ckpt.metadata;
  if (!manifest_is_wav(manifest)) {
    auto ds = load_feature_records(manifest);
    if (ds.layers != lm.cfg.feature_layers || ds.dim != lm.cfg.dim)
      throw std::runtime_error(manifest + ": features are [" + std::to_string(ds.layers) + " x T x " +
                               std::to_string(ds.dim) + "] but the model expects [" +
                               std::to_string(lm.cfg.feature_layers) + " x T x " +
                               std::to_string(lm.cfg.dim) + "]");
    return std::move(ds.records);
  }
  if (!meta.contains("wave_stats"))
    throw std::runtime_error(manifest +
                             ": manifest points at waveforms but the checkpoint was not trained "
                             "on waveforms (no stored wave stats)");
  const auto& data = meta.at("data");
  const int rate = data.at("sample_rate").get<int>();
  const int n_mels = data.at("n_mels").get<int>();
  const WaveStats stats = wave_stats_from(meta.at("wave_stats"));
  std::vector<FeatureRecord> out;
  for (const auto& e : read_manifest(manifest)) {
    if (e.wav_path.empty())
      throw std::runtime_error("record " + e.id + ": waveform evaluation needs wav_path");
    const auto w = normalize_waveform(read_wav(e.wav_path, rate), stats);
    auto mel = mel_features(w, n_mels, rate);
    FeatureRecord rec;
    rec.id = e.id;
    rec.label = e.label;
    rec.acoustic = TensorF::make({1, mel->dims[0], mel->dims[1]}, std::move(mel->data));
    rec.text = TensorF::zeros({0, n_mels});
    out.push_back(std::move(rec));
  }
  return out;
}

ProbRow predict_probs(DmhaModel& model, const FeatureRecord& rec) {
  GraphF g;
  g.set_recording(false);
  const auto p = model.forward(g, rec, false, nullptr);
  ProbRow row{};
  for (int k = 0; k < kNumClasses; ++k) row[size_t(k)] = double(p->data[size_t(k)]);
  return row;
}

/// Per-member thresholded predictions, then a hard vote when there are 3.
std::vector<int> ensemble_predict(Members& ms, const std::vector<FeatureRecord>& records) {
  std::array<std::vector<int>, 3> member_preds;
  for (size_t m = 0; m < ms.models.size(); ++m) {
    auto& lm = ms.models[m];
    for (const auto& rec : records)
      member_preds[m].push_back(predict_with_thresholds(predict_probs(*lm.model, rec),
                                                        lm.thresholds));
  }
  if (ms.models.size() == 1) return member_preds[0];
  return hard_vote_all(member_preds, ms.tie_breaker);
}

// ---- subcommands ------------------------------------------------------------

void run_synth(const std::string& config_path, const std::string& out_dir, int val_per_class,
               uint64_t seed) {
  RunConfig cfg = config_or_default(config_path);
  const SynthSpec& spec = cfg.data.synth;
  const auto train = synth_dataset(spec, seed, "train");
  SynthSpec val_spec = spec;
  val_spec.class_profile.clear();
  val_spec.per_class = val_per_class;
  const auto val = synth_dataset(val_spec, seed, "val");

  fs::create_directories(fs::path(out_dir) / "features");
  auto dump_split = [&](const std::vector<FeatureRecord>& records, const std::string& name) {
    std::vector<ManifestEntry> entries;
    for (const auto& rec : records) {
      ManifestEntry e;
      e.id = rec.id;
      e.label = rec.label;
      const std::string rel = "features/" + rec.id + ".dmhf";
      write_features((fs::path(out_dir) / rel).string(), *rec.acoustic);
      e.acoustic_path = rel;
      if (rec.text->dims[0] > 0) {
        const std::string trel = "features/" + rec.id + ".text.dmhf";
        write_text_features((fs::path(out_dir) / trel).string(), *rec.text);
        e.text_path = trel;
      }
      entries.push_back(std::move(e));
    }
    const std::string path = (fs::path(out_dir) / (name + ".jsonl")).string();
    write_manifest(path, entries);
    return path;
  };
  const json out = {{"train_manifest", dump_split(train, "train")},
                    {"val_manifest", dump_split(val, "val")},
                    {"train_records", train.size()},
                    {"val_records", val.size()},
                    {"layers", spec.layers},
                    {"dim", spec.dim}};
  std::cout << out.dump() << "\n";
}

void run_extract(const std::string& config_path, const std::string& manifest,
                 const std::string& out_dir) {
  RunConfig cfg = config_or_default(config_path);
  const int rate = cfg.data.sample_rate;
  fs::create_directories(fs::path(out_dir) / "features");
  std::vector<ManifestEntry> out_entries;
  for (const auto& e : read_manifest(manifest)) {
    if (e.wav_path.empty())
      throw std::runtime_error("record " + e.id + ": extraction needs wav_path");
    const auto mel = mel_features(read_wav(e.wav_path, rate), cfg.data.n_mels, rate);
    TensorF stack;
    stack.dims = {1, mel->dims[0], mel->dims[1]};
    stack.data = mel->data;
    const std::string rel = "features/" + e.id + ".dmhf";
    write_features((fs::path(out_dir) / rel).string(), stack);
    ManifestEntry oe;
    oe.id = e.id;
    oe.label = e.label;
    oe.acoustic_path = rel;
    out_entries.push_back(std::move(oe));
  }
  const std::string out_manifest = (fs::path(out_dir) / "manifest.jsonl").string();
  write_manifest(out_manifest, out_entries);
  std::cout << json{{"manifest", out_manifest}, {"records", out_entries.size()},
                    {"n_mels", cfg.data.n_mels}}
                   .dump()
            << "\n";
}

void run_augment(const std::string& config_path, const std::string& in_path,
                 const std::string& out_path, uint64_t seed) {
  RunConfig cfg = config_or_default(config_path);
  const int rate = cfg.data.sample_rate;
  const auto policy = cfg.augment.load_policy(rate);
  const auto w = read_wav(in_path, rate);
  RngStream rng = RngStream(seed).derive("augment-cli");
  const auto v = augment(w, policy, rate, rng, true);
  write_wav(out_path, v, rate);
  std::cout << json{{"in", in_path},
                    {"out", out_path},
                    {"input_samples", w.size()},
                    {"output_samples", v.size()}}
                   .dump()
            << "\n";
}

void run_train(const std::string& config_path, const std::string& train_manifest,
               const std::string& val_manifest, const std::string& out_path, uint64_t seed,
               bool seed_given) {
  RunConfig cfg = config_or_default(config_path);
  if (seed_given) {
    cfg.seed = seed;
    cfg.train.seed = seed;
  }
  const bool wav = manifest_is_wav(train_manifest);
  if (manifest_is_wav(val_manifest) != wav)
    throw std::runtime_error("train and validation manifests must be the same kind "
                             "(both features or both waveforms)");

  RecordProvider train_p, val_p;
  int layers = 1;
  json data_meta;
  json stats_meta;
  if (!wav) {
    auto tr = load_feature_records(train_manifest);
    auto va = load_feature_records(val_manifest);
    if (tr.dim != cfg.model.dim)
      throw std::runtime_error("config: model.dim is " + std::to_string(cfg.model.dim) +
                               " but the training features have dim " + std::to_string(tr.dim));
    if (va.layers != tr.layers || va.dim != tr.dim)
      throw std::runtime_error("validation features do not match the training features");
    layers = tr.layers;
    train_p = make_provider(std::move(tr.records));
    val_p = make_provider(std::move(va.records));
    data_meta = {{"kind", "features"},
                 {"sample_rate", cfg.data.sample_rate},
                 {"n_mels", cfg.data.n_mels}};
  } else {
    if (cfg.model.dim != cfg.data.n_mels)
      throw std::runtime_error("config: model.dim must equal data.n_mels for waveform training");
    const int rate = cfg.data.sample_rate;
    auto tr = std::make_shared<WavDataset>(load_wav_dataset(train_manifest, rate));
    auto va = std::make_shared<WavDataset>(load_wav_dataset(val_manifest, rate));
    auto policy = cfg.augment.load_policy(rate);
    if (policy.apply_prob > 0.0 && (policy.rir_pool.empty() || policy.noise_pool.empty()))
      throw std::runtime_error(
          "config: augment.apply_prob > 0 needs augment.rir_wavs and augment.noise_wavs");
    const WaveStats stats = tr->stats;
    train_p = wav_provider(tr, policy, stats, cfg.data.n_mels, rate, cfg.seed, true);
    val_p = wav_provider(va, policy, stats, cfg.data.n_mels, rate, cfg.seed, false);
    data_meta = {{"kind", "wav"}, {"sample_rate", rate}, {"n_mels", cfg.data.n_mels}};
    stats_meta = wave_stats_json(stats);
  }

  cfg.model.feature_layers = layers;
  cfg.model.validate();
  DmhaModel model(cfg.model, cfg.seed);
  auto res = train_loop(model, train_p, val_p, cfg.train, [](const EpochLog& e) {
    std::cout << json{{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_macro_f1", e.val_macro_f1},
                      {"lr", e.lr},
                      {"improved", e.improved}}
                     .dump()
              << "\n";
  });

  res.best.metadata["model"] = model_to_json(cfg.model);
  res.best.metadata["feature_layers"] = layers;
  res.best.metadata["data"] = data_meta;
  if (!stats_meta.is_null()) res.best.metadata["wave_stats"] = stats_meta;
  write_checkpoint(out_path, res.best);
  std::cout << json{{"checkpoint", out_path},
                    {"best_epoch", res.best_epoch},
                    {"best_val_macro_f1", res.best_val_f1},
                    {"epochs_run", res.epochs_run}}
                   .dump()
            << "\n";
}

void run_tune(const std::string& model_path, const std::string& manifest,
              const std::string& out_path) {
  auto lm = load_model(model_path);
  const auto records = eval_records(manifest, lm);
  std::vector<ProbRow> probs;
  std::vector<int> labels;
  for (const auto& rec : records) {
    probs.push_back(predict_probs(*lm.model, rec));
    labels.push_back(rec.label);
  }
  const double before = macro_f1(labels, predict_all(probs, lm.thresholds));
  const auto ts = tune_thresholds(probs, labels);
  const double after = macro_f1(labels, predict_all(probs, ts));
  lm.ckpt.metadata["thresholds"] =
      std::vector<double>(ts.t.begin(), ts.t.end());
  write_checkpoint(out_path, lm.ckpt);
  std::cout << json{{"checkpoint", out_path},
                    {"thresholds", lm.ckpt.metadata["thresholds"]},
                    {"macro_f1_before", before},
                    {"macro_f1_after", after}}
                   .dump()
            << "\n";
}

void run_eval(const std::string& model_path, const std::string& ensemble_path,
              const std::string& manifest) {
  auto ms = load_members(model_path, ensemble_path);
  const auto records = eval_records(manifest, ms.models[0]);
  const auto preds = ensemble_predict(ms, records);
  std::vector<int> truth;
  for (const auto& rec : records) truth.push_back(rec.label);
  const auto rep = classification_report(truth, preds);

  json per_class = json::array();
  for (int k = 0; k < kNumClasses; ++k)
    per_class.push_back({{"class", kClassNames[size_t(k)]},
                         {"precision", rep.precision[size_t(k)]},
                         {"recall", rep.recall[size_t(k)]},
                         {"f1", rep.f1[size_t(k)]},
                         {"support", rep.support[size_t(k)]}});
  json confusion = json::array();
  for (int t = 0; t < kNumClasses; ++t)
    confusion.push_back(std::vector<int>(rep.confusion[size_t(t)].begin(),
                                         rep.confusion[size_t(t)].end()));
  std::cout << json{{"records", records.size()},
                    {"macro_f1", rep.macro_f1},
                    {"accuracy", rep.accuracy},
                    {"per_class", per_class},
                    {"confusion", confusion}}
                   .dump()
            << "\n";
}

void run_predict(const std::string& model_path, const std::string& ensemble_path,
                 const std::string& manifest, const std::string& out_path) {
  auto ms = load_members(model_path, ensemble_path);
  const auto records = eval_records(manifest, ms.models[0]);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot create " + out_path);
    out = &file;
  }
  if (ms.models.size() == 1) {
    auto& lm = ms.models[0];
    for (const auto& rec : records) {
      const auto p = predict_probs(*lm.model, rec);
      const int k = predict_with_thresholds(p, lm.thresholds);
      (*out) << json{{"id", rec.id},
                     {"prediction", kClassNames[size_t(k)]},
                     {"probs", std::vector<double>(p.begin(), p.end())}}
                    .dump()
             << "\n";
    }
  } else {
    std::array<std::vector<int>, 3> member_preds;
    for (size_t m = 0; m < 3; ++m)
      for (const auto& rec : records)
        member_preds[m].push_back(predict_with_thresholds(
            predict_probs(*ms.models[m].model, rec), ms.models[m].thresholds));
    const auto final_preds = hard_vote_all(member_preds, ms.tie_breaker);
    for (size_t i = 0; i < records.size(); ++i) {
      json votes = json::array();
      for (size_t m = 0; m < 3; ++m) votes.push_back(kClassNames[size_t(member_preds[m][i])]);
      (*out) << json{{"id", records[i].id},
                     {"prediction", kClassNames[size_t(final_preds[i])]},
                     {"votes", votes}}
                    .dump()
             << "\n";
    }
  }
  if (!out_path.empty() && !file) throw std::runtime_error("failed writing " + out_path);
}

int run_gradcheck(const std::string& variant, uint64_t seed, int coords, double tolerance,
                  int width, int hidden_layers) {
  std::vector<AttentionVariant> variants;
  if (variant == "standard" || variant == "both") variants.push_back(AttentionVariant::standard);
  if (variant == "subvector" || variant == "both") variants.push_back(AttentionVariant::subvector);
  if (variants.empty())
    throw std::runtime_error("gradcheck: variant must be standard, subvector, or both");

  bool all_passed = true;
  json out = json::array();
  for (auto v : variants) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.feature_layers = 2;
    cfg.hidden_width = width;
    cfg.hidden_layers = hidden_layers;
    cfg.dropout = 0.0;
    const auto report = gradcheck_model(cfg, seed, coords, tolerance);
    json groups = json::array();
    for (const auto& g : report.groups)
      groups.push_back({{"name", g.name}, {"max_rel_err", g.max_rel_err}, {"coords", g.coords}});
    out.push_back({{"variant", to_string(v)},
                   {"max_rel_err", report.max_rel_err},
                   {"tolerance", report.tolerance},
                   {"passed", report.passed},
                   {"groups", groups}});
    all_passed = all_passed && report.passed;
  }
  std::cout << out.dump() << "\n";
  return all_passed ? 0 : 1;
}

void run_config(const std::string& config_path, const std::string& out_path) {
  const json j = config_to_json(config_or_default(config_path));
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot create " + out_path);
    f << j.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"double multi-head attention speech emotion recognizer"};
  app.require_subcommand(1);
  int rc = 0;

  std::string config_path, out_path, manifest, train_manifest, val_manifest;
  std::string model_path, ensemble_path, in_path, variant = "both";
  uint64_t seed = 42;
  int val_per_class = 10, coords = 5, width = 512, hidden_layers = 4;
  double tolerance = 1e-4;

  auto* synth = app.add_subcommand("synth", "generate a synthetic feature dataset");
  synth->add_option("--config", config_path, "run configuration JSON");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--val-per-class", val_per_class, "balanced validation records per class");
  auto* synth_seed = synth->add_option("--seed", seed, "override the config seed");
  synth->callback([&] {
    RunConfig cfg = config_or_default(config_path);
    run_synth(config_path, out_path, val_per_class, synth_seed->count() ? seed : cfg.seed);
  });

  auto* extract = app.add_subcommand("extract", "turn a waveform manifest into mel features");
  extract->add_option("--config", config_path, "run configuration JSON");
  extract->add_option("--manifest", manifest, "waveform manifest")->required();
  extract->add_option("--out", out_path, "output directory")->required();
  extract->callback([&] { run_extract(config_path, manifest, out_path); });

  auto* aug = app.add_subcommand("augment", "apply the training augmentation to one wav");
  aug->add_option("--config", config_path, "run configuration JSON");
  aug->add_option("--in", in_path, "input wav")->required();
  aug->add_option("--out", out_path, "output wav")->required();
  aug->add_option("--seed", seed, "augmentation seed");
  aug->callback([&] { run_augment(config_path, in_path, out_path, seed); });

  auto* train = app.add_subcommand("train", "train a model from a manifest pair");
  train->add_option("--config", config_path, "run configuration JSON");
  train->add_option("--train-manifest", train_manifest, "training manifest")->required();
  train->add_option("--val-manifest", val_manifest, "validation manifest")->required();
  train->add_option("--out", out_path, "checkpoint to write")->required();
  auto* train_seed = train->add_option("--seed", seed, "override the config seed");
  train->callback([&] {
    run_train(config_path, train_manifest, val_manifest, out_path, seed,
              train_seed->count() > 0);
  });

  auto* tune = app.add_subcommand("tune-thresholds",
                                  "fit per-class decision thresholds on a validation manifest");
  tune->add_option("--model", model_path, "input checkpoint")->required();
  tune->add_option("--manifest", manifest, "validation manifest")->required();
  tune->add_option("--out", out_path, "checkpoint to write")->required();
  tune->callback([&] { run_tune(model_path, manifest, out_path); });

  auto* eval = app.add_subcommand("eval", "score a model or ensemble on a labeled manifest");
  auto* eval_model = eval->add_option("--model", model_path, "checkpoint to evaluate");
  eval->add_option("--ensemble", ensemble_path, "ensemble spec JSON")->excludes(eval_model);
  eval->add_option("--manifest", manifest, "labeled manifest")->required();
  eval->callback([&] { run_eval(model_path, ensemble_path, manifest); });

  auto* predict = app.add_subcommand("predict", "emit per-utterance predictions");
  auto* pred_model = predict->add_option("--model", model_path, "checkpoint to use");
  predict->add_option("--ensemble", ensemble_path, "ensemble spec JSON")->excludes(pred_model);
  predict->add_option("--manifest", manifest, "input manifest")->required();
  predict->add_option("--out", out_path, "JSON-lines output file (default stdout)");
  predict->callback([&] { run_predict(model_path, ensemble_path, manifest, out_path); });

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full gradient path");
  gc->add_option("--variant", variant, "standard, subvector, or both");
  gc->add_option("--seed", seed, "parameter seed");
  gc->add_option("--coords", coords, "probed coordinates per parameter group");
  gc->add_option("--tolerance", tolerance, "max relative error");
  gc->add_option("--width", width, "classifier hidden width");
  gc->add_option("--hidden-layers", hidden_layers, "classifier hidden layers");
  gc->callback([&] { rc = run_gradcheck(variant, seed, coords, tolerance, width, hidden_layers); });

  auto* config = app.add_subcommand("config", "print the effective configuration");
  config->add_option("--config", config_path, "run configuration JSON to normalize");
  config->add_option("--out", out_path, "write to a file instead of stdout");
  config->callback([&] { run_config(config_path, out_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return rc;
}
