// Copyright (c) 2026 SceneGuard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sceneguard/harness.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "sceneguard/error.h"
#include "sceneguard/log.h"
#include "sceneguard/metrics.h"
#include "sceneguard/noise_library.h"
#include "sceneguard/stats.h"

namespace sceneguard {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kAttackSuccessThreshold = 0.7;
constexpr int kStatIterations = 10000;

double Nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::string Trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void WriteTextFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

json JsonNumberOrNull(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

// Runs fn(0..n-1) on `jobs` worker threads. Exceptions must be handled
// inside fn; results land in caller-owned slots so output order never
// depends on scheduling.
void RunParallel(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  int workers = jobs > 0 ? jobs
                         : static_cast<int>(std::max(
                               1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(workers), std::max<size_t>(n, 1)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

double MeanOf(const std::vector<double>& v) {
  double acc = 0.0;
  for (const double x : v) acc += x;
  return v.empty() ? Nan() : acc / static_cast<double>(v.size());
}

double MedianOf(std::vector<double> v) {
  if (v.empty()) return Nan();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Aggregate block for one metric: mean, median, and a bootstrap CI when the
// sample is large enough.
json AggregateMetric(const std::vector<double>& values, uint64_t seed,
                     const std::string& label) {
  json out;
  out["n"] = values.size();
  out["mean"] = JsonNumberOrNull(MeanOf(values));
  out["median"] = JsonNumberOrNull(MedianOf(values));
  if (values.size() >= 2) {
    Rng rng(Rng::DeriveSeed(seed, "bootstrap:" + label));
    const BootstrapCi ci =
        ComputeBootstrapCi(values, 0.95, kStatIterations, &rng);
    out["ci_lo"] = ci.lo;
    out["ci_hi"] = ci.hi;
    out["ci_level"] = ci.level;
    out["ci_iterations"] = ci.iterations;
  } else {
    out["ci_lo"] = nullptr;
    out["ci_hi"] = nullptr;
  }
  return out;
}

std::string ReplacePlaceholder(std::string tmpl, const std::string& what,
                               const std::string& with) {
  size_t pos = 0;
  while ((pos = tmpl.find(what, pos)) != std::string::npos) {
    tmpl.replace(pos, what.size(), with);
    pos += with.size();
  }
  return tmpl;
}

// ASR hook: run `asr_cmd` on a WAV and normalize its stdout into tokens.
Transcript RunAsrHook(const std::string& asr_cmd, const std::string& wav_path,
                      const std::string& utterance_id) {
  std::string cmd = asr_cmd;
  if (cmd.find("{in}") != std::string::npos) {
    cmd = ReplacePlaceholder(cmd, "{in}", wav_path);
  } else {
    cmd += " '" + wav_path + "'";
  }
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw BackendError("asr hook: cannot spawn: " + cmd);
  std::string output;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  if (pclose(pipe) != 0)
    throw BackendError("asr hook exited nonzero: " + cmd);
  return NormalizeTranscript(utterance_id, output);
}

struct LoadedCorpus {
  std::vector<UtteranceSpec> specs;
  // transcripts[i] is the reference text for specs[i] when available.
  std::vector<std::optional<std::string>> transcripts;
};

LoadedCorpus LoadCorpus(const ExperimentConfig& config) {
  LoadedCorpus corpus;
  corpus.specs = LoadSpeechManifest(config.speech_manifest);
  corpus.transcripts.resize(corpus.specs.size());
  std::map<std::string, std::map<std::string, std::string>> cache;
  for (size_t i = 0; i < corpus.specs.size(); ++i) {
    const auto& spec = corpus.specs[i];
    if (spec.transcript_path.empty()) continue;
    auto it = cache.find(spec.transcript_path);
    if (it == cache.end())
      it = cache.emplace(spec.transcript_path,
                         LoadTranscripts(spec.transcript_path))
               .first;
    const auto& table = it->second;
    auto entry = table.find(spec.id);
    if (entry != table.end()) corpus.transcripts[i] = entry->second;
  }
  return corpus;
}

Waveform LoadCanonical(const std::string& path) {
  return Resample(ReadWav(path), kCanonicalSampleRate);
}

// Pads with zeros or truncates to `len`.
Waveform AlignLength(Waveform w, size_t len) {
  w.samples.resize(len, 0.0);
  return w;
}

// Synthetic noise sources for the random/gaussian baselines; mixed at the
// same SNR range through the unchanged mixer.
NoiseClip MakeBaselineNoise(const std::string& kind, size_t len, Rng* rng) {
  NoiseClip clip;
  clip.scene = kind;
  clip.source_id = kind;
  clip.audio.sample_rate_hz = kCanonicalSampleRate;
  clip.audio.samples.resize(len);
  for (size_t t = 0; t < len; ++t) {
    clip.audio.samples[t] =
        kind == "random" ? rng->Uniform(-1.0, 1.0) : rng->Normal(0.0, 1.0);
  }
  return clip;
}

json MakeReportEnvelope(const ExperimentConfig& config,
                        const std::string& command, double wall_clock_sec) {
  json doc;
  doc["schema_version"] = 1;
  doc["tool"] = {{"name", "sceneguard"}, {"version", kToolVersion}};
  doc["command"] = command;
  doc["config"] = config.Echo();
  doc["wall_clock_sec"] = wall_clock_sec;
  return doc;
}

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Countermeasure with the configured codec hook filled in. Returns nullopt
// when the countermeasure needs a hook that is not configured (row skipped).
std::optional<Countermeasure> ResolveCountermeasure(
    const ExperimentConfig& config, Countermeasure cm) {
  if (cm.kind == CountermeasureKind::kExternalCodec) {
    if (config.codec_encode_cmd.empty() || config.codec_decode_cmd.empty())
      return std::nullopt;
    cm.encode_cmd = config.codec_encode_cmd;
    cm.decode_cmd = config.codec_decode_cmd;
  }
  return cm;
}

}  // namespace

std::vector<UtteranceSpec> LoadSpeechManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open speech manifest: " + path);
  const fs::path base = fs::path(path).parent_path();

  std::vector<UtteranceSpec> specs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = Trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(Trim(col));
    if (first) {
      first = false;
      if (!cols.empty() && cols[0] == "utterance_id") continue;  // header
    }
    if (cols.size() < 3)
      throw FormatError(
          "speech manifest row needs `utterance_id,wav_path,scene`: " + path);
    UtteranceSpec spec;
    spec.id = cols[0];
    spec.scene = cols[2];
    fs::path wav(cols[1]);
    spec.wav_path = (wav.is_relative() ? base / wav : wav).string();
    if (cols.size() >= 4 && !cols[3].empty()) {
      fs::path tr(cols[3]);
      spec.transcript_path = (tr.is_relative() ? base / tr : tr).string();
    }
    if (spec.id.empty() || spec.scene.empty())
      throw FormatError("speech manifest: empty utterance_id or scene: " +
                        path);
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::map<std::string, std::string> LoadTranscripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript file: " + path);
  std::map<std::string, std::string> table;
  std::string line;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("transcript line needs `utterance_id<TAB>text`: " +
                        path);
    table[Trim(line.substr(0, tab))] = Trim(line.substr(tab + 1));
  }
  return table;
}

namespace {

Countermeasure ParseCountermeasureJson(const json& item) {
  std::string kind;
  std::string bitrate;
  if (item.is_string()) {
    kind = item.get<std::string>();
    // Shorthand rows for the usual codec bitrates.
    if (kind == "mp3_128") {
      kind = "external_codec";
      bitrate = "128k";
    } else if (kind == "mp3_64") {
      kind = "external_codec";
      bitrate = "64k";
    }
  } else if (item.is_object()) {
    kind = item.value("kind", "");
    bitrate = item.value("bitrate", "");
  } else {
    throw ConfigError("countermeasure entries must be strings or objects");
  }

  if (kind == "none") return Countermeasure::None();
  if (kind == "spectral_subtraction") {
    Countermeasure cm = Countermeasure::SpectralSubtraction();
    if (item.is_object()) {
      cm.oversubtraction = item.value("oversubtraction", cm.oversubtraction);
      cm.spectral_floor = item.value("spectral_floor", cm.spectral_floor);
      cm.noise_frame_fraction =
          item.value("noise_frame_fraction", cm.noise_frame_fraction);
    }
    return cm;
  }
  if (kind == "lowpass_3400") {
    Countermeasure cm = Countermeasure::Lowpass3400();
    if (item.is_object()) {
      cm.cutoff_hz = item.value("cutoff_hz", cm.cutoff_hz);
      cm.filter_order = item.value("filter_order", cm.filter_order);
    }
    return cm;
  }
  if (kind == "downsample_8k") {
    Countermeasure cm = Countermeasure::Downsample8k();
    if (item.is_object())
      cm.target_rate_hz = item.value("target_rate_hz", cm.target_rate_hz);
    return cm;
  }
  if (kind == "external_codec") {
    // Hook commands are injected at run time from the config/envs.
    Countermeasure cm;
    cm.kind = CountermeasureKind::kExternalCodec;
    cm.bitrate = bitrate;
    return cm;
  }
  throw ConfigError("unknown countermeasure kind: " + kind);
}

json CountermeasureToJson(const Countermeasure& cm) {
  json j;
  j["kind"] = cm.Name();
  switch (cm.kind) {
    case CountermeasureKind::kSpectralSubtraction:
      j["kind"] = "spectral_subtraction";
      j["oversubtraction"] = cm.oversubtraction;
      j["spectral_floor"] = cm.spectral_floor;
      j["noise_frame_fraction"] = cm.noise_frame_fraction;
      break;
    case CountermeasureKind::kLowpass3400:
      j["kind"] = "lowpass_3400";
      j["cutoff_hz"] = cm.cutoff_hz;
      j["filter_order"] = cm.filter_order;
      break;
    case CountermeasureKind::kDownsample8k:
      j["kind"] = "downsample_8k";
      j["target_rate_hz"] = cm.target_rate_hz;
      break;
    case CountermeasureKind::kExternalCodec:
      j["kind"] = "external_codec";
      j["bitrate"] = cm.bitrate;
      break;
    case CountermeasureKind::kNone:
      j["kind"] = "none";
      break;
  }
  return j;
}

std::vector<Countermeasure> DefaultCountermeasures() {
  std::vector<Countermeasure> cms;
  cms.push_back(Countermeasure::None());
  {
    Countermeasure mp3;
    mp3.kind = CountermeasureKind::kExternalCodec;
    mp3.bitrate = "128k";
    cms.push_back(mp3);
    mp3.bitrate = "64k";
    cms.push_back(mp3);
  }
  cms.push_back(Countermeasure::SpectralSubtraction());
  cms.push_back(Countermeasure::Lowpass3400());
  cms.push_back(Countermeasure::Downsample8k());
  return cms;
}

}  // namespace

json ExperimentConfig::Echo() const {
  json j;
  j["speech_manifest"] = speech_manifest;
  j["noise_manifest"] = noise_manifest;
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["optim"] = {{"lr", optim.lr},
                {"epochs", optim.epochs},
                {"lambda_sim", optim.lambda_sim},
                {"lambda_reg", optim.lambda_reg},
                {"clip_norm", optim.clip_norm},
                {"snr_min_db", optim.snr_min_db},
                {"snr_max_db", optim.snr_max_db},
                {"adam_beta1", optim.adam_beta1},
                {"adam_beta2", optim.adam_beta2},
                {"adam_eps", optim.adam_eps},
                {"normalize_output", optim.normalize_output}};
  j["encoder"] = {{"kind", encoder.kind == EncoderKind::kBuiltinMelStats
                               ? "builtin"
                               : "external"},
                  {"command", encoder.command}};
  j["countermeasures"] = json::array();
  for (const auto& cm : countermeasures)
    j["countermeasures"].push_back(CountermeasureToJson(cm));
  j["codec"] = {{"encode_cmd", codec_encode_cmd},
                {"decode_cmd", codec_decode_cmd}};
  j["asr_cmd"] = asr_cmd;
  j["noise_source"] = noise_source;
  j["allowed_scenes"] = allowed_scenes;
  return j;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    fs::path fp(p);
    return (fp.is_relative() ? base / fp : fp).string();
  };

  ExperimentConfig cfg;
  cfg.speech_manifest = resolve(doc.value("speech_manifest", ""));
  cfg.noise_manifest = resolve(doc.value("noise_manifest", ""));
  cfg.output_dir = doc.value("output_dir", cfg.output_dir);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.jobs = doc.value("jobs", cfg.jobs);

  if (doc.contains("optim")) {
    const json& o = doc["optim"];
    cfg.optim.lr = o.value("lr", cfg.optim.lr);
    cfg.optim.epochs = o.value("epochs", cfg.optim.epochs);
    cfg.optim.lambda_sim = o.value("lambda_sim", cfg.optim.lambda_sim);
    cfg.optim.lambda_reg = o.value("lambda_reg", cfg.optim.lambda_reg);
    cfg.optim.clip_norm = o.value("clip_norm", cfg.optim.clip_norm);
    cfg.optim.snr_min_db = o.value("snr_min_db", cfg.optim.snr_min_db);
    cfg.optim.snr_max_db = o.value("snr_max_db", cfg.optim.snr_max_db);
    cfg.optim.adam_beta1 = o.value("adam_beta1", cfg.optim.adam_beta1);
    cfg.optim.adam_beta2 = o.value("adam_beta2", cfg.optim.adam_beta2);
    cfg.optim.adam_eps = o.value("adam_eps", cfg.optim.adam_eps);
    cfg.optim.normalize_output =
        o.value("normalize_output", cfg.optim.normalize_output);
  }
  cfg.optim.seed = cfg.seed;

  if (doc.contains("encoder")) {
    const std::string kind = doc["encoder"].value("kind", "builtin");
    if (kind == "builtin") {
      cfg.encoder.kind = EncoderKind::kBuiltinMelStats;
    } else if (kind == "external") {
      cfg.encoder.kind = EncoderKind::kExternalCommand;
      cfg.encoder.command = doc["encoder"].value("command", "");
      if (cfg.encoder.command.empty())
        throw ConfigError("external encoder needs a command");
    } else {
      throw ConfigError("unknown encoder kind: " + kind);
    }
  }

  if (doc.contains("countermeasures")) {
    for (const auto& item : doc["countermeasures"])
      cfg.countermeasures.push_back(ParseCountermeasureJson(item));
  } else {
    cfg.countermeasures = DefaultCountermeasures();
  }

  if (doc.contains("codec")) {
    cfg.codec_encode_cmd = doc["codec"].value("encode_cmd", "");
    cfg.codec_decode_cmd = doc["codec"].value("decode_cmd", "");
  }
  cfg.asr_cmd = doc.value("asr_cmd", "");
  cfg.noise_source = doc.value("noise_source", cfg.noise_source);
  if (cfg.noise_source != "scene" && cfg.noise_source != "random" &&
      cfg.noise_source != "gaussian")
    throw ConfigError("noise_source must be scene, random, or gaussian");
  if (doc.contains("allowed_scenes"))
    cfg.allowed_scenes =
        doc["allowed_scenes"].get<std::vector<std::string>>();

  // Hook overrides from the environment.
  if (const char* v = std::getenv("SCENEGUARD_CODEC_ENCODE"))
    cfg.codec_encode_cmd = v;
  if (const char* v = std::getenv("SCENEGUARD_CODEC_DECODE"))
    cfg.codec_decode_cmd = v;
  if (const char* v = std::getenv("SCENEGUARD_ASR_CMD")) cfg.asr_cmd = v;
  return cfg;
}

AblateMode ParseAblateMode(const std::string& name) {
  if (name == "snr_sweep") return AblateMode::kSnrSweep;
  if (name == "optimization") return AblateMode::kOptimization;
  if (name == "hyperparameter") return AblateMode::kHyperparameter;
  throw ConfigError(
      "ablate mode must be snr_sweep, optimization, or hyperparameter");
}

// ---------------------------------------------------------------------------
// protect
// ---------------------------------------------------------------------------

namespace {

struct ProtectRow {
  std::string id;
  bool ok = false;
  std::string message;
  double final_sim = Nan();
  double final_snr_db = Nan();
  int epochs = 0;
};

NoiseClip PickNoise(const ExperimentConfig& config, const NoiseLibrary* lib,
                    const UtteranceSpec& spec, size_t speech_len, Rng* rng) {
  if (config.noise_source == "scene") {
    return SampleNoise(*lib, spec.scene, rng);
  }
  return MakeBaselineNoise(config.noise_source, speech_len, rng);
}

}  // namespace

int CmdProtect(const ExperimentConfig& config) {
  const WallClock clock;
  const LoadedCorpus corpus = LoadCorpus(config);
  if (corpus.specs.empty())
    throw ConfigError("speech manifest lists no utterances");

  NoiseLibrary lib;
  if (config.noise_source == "scene")
    lib = LoadNoiseLibrary(config.noise_manifest, config.allowed_scenes);

  fs::create_directories(config.output_dir);
  std::vector<ProtectRow> rows(corpus.specs.size());

  RunParallel(corpus.specs.size(), config.jobs, [&](size_t i) {
    const UtteranceSpec& spec = corpus.specs[i];
    ProtectRow& row = rows[i];
    row.id = spec.id;
    try {
      Rng rng(Rng::DeriveSeed(config.seed, "protect:" + spec.id));
      const Waveform speech = LoadCanonical(spec.wav_path);
      const NoiseClip clip =
          PickNoise(config, &lib, spec, speech.samples.size(), &rng);
      const ProtectionResult result =
          Protect(speech, clip, config.optim, &rng);

      row.final_sim = CosineSimilarity(
          EmbedBuiltin(speech), EmbedBuiltin(result.protected_audio));
      row.final_snr_db = result.final_snr_db;
      row.epochs = static_cast<int>(result.trace.size());

      const fs::path out_dir(config.output_dir);
      WriteWav(result.protected_audio,
               (out_dir / (spec.id + ".wav")).string());

      json trace;
      trace["utterance_id"] = spec.id;
      trace["scene"] = spec.scene;
      trace["noise_source_id"] = clip.source_id;
      trace["final_gamma"] = result.final_gamma;
      trace["final_snr_db"] = result.final_snr_db;
      trace["final_sim"] = row.final_sim;
      trace["epochs"] = json::array();
      for (const auto& rec : result.trace) {
        trace["epochs"].push_back({{"epoch", rec.epoch},
                                   {"total_loss", rec.total_loss},
                                   {"sim_loss", rec.sim_loss},
                                   {"reg_loss", rec.reg_loss},
                                   {"grad_norm", rec.grad_norm},
                                   {"snr_db", rec.snr_db}});
      }
      WriteTextFile((out_dir / (spec.id + ".trace.json")).string(),
                    trace.dump(2) + "\n");
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.message = e.what();
      Warn("protect failed for utterance " + spec.id + ": " + e.what());
    }
  });

  std::string csv = "utterance_id,status,final_sim,final_snr_db,epochs\n";
  bool all_ok = true;
  for (const auto& row : rows) {
    all_ok = all_ok && row.ok;
    csv += row.id;
    csv += row.ok ? ",ok," : ",error,";
    csv += FormatDouble(row.final_sim);
    csv += ",";
    csv += FormatDouble(row.final_snr_db);
    csv += ",";
    csv += std::to_string(row.epochs);
    csv += "\n";
  }
  WriteTextFile((fs::path(config.output_dir) / "summary.csv").string(), csv);

  json report = MakeReportEnvelope(config, "protect", clock.Seconds());
  report["utterances"] = json::array();
  for (const auto& row : rows) {
    report["utterances"].push_back(
        {{"utterance_id", row.id},
         {"status", row.ok ? "ok" : "error"},
         {"message", row.message},
         {"final_sim", JsonNumberOrNull(row.final_sim)},
         {"final_snr_db", JsonNumberOrNull(row.final_snr_db)},
         {"epochs", row.epochs}});
  }
  WriteTextFile(
      (fs::path(config.output_dir) / "protect_report.json").string(),
      report.dump(2) + "\n");
  return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

struct EvalRow {
  std::string id;
  bool ok = false;
  std::string message;
  double sim = Nan();
  double stoi = Nan();
  double mcd = Nan();
  double wer = Nan();
};

std::vector<double> ValidValues(const std::vector<EvalRow>& rows,
                                double EvalRow::*member) {
  std::vector<double> out;
  for (const auto& row : rows) {
    if (row.ok && !std::isnan(row.*member)) out.push_back(row.*member);
  }
  return out;
}

}  // namespace

int CmdEvaluate(const ExperimentConfig& config, const std::string& clean_dir,
                const std::string& protected_dir) {
  const WallClock clock;
  const LoadedCorpus corpus = LoadCorpus(config);
  if (corpus.specs.empty())
    throw ConfigError("speech manifest lists no utterances");

  std::vector<EvalRow> rows(corpus.specs.size());
  RunParallel(corpus.specs.size(), config.jobs, [&](size_t i) {
    const UtteranceSpec& spec = corpus.specs[i];
    EvalRow& row = rows[i];
    row.id = spec.id;
    try {
      const std::string clean_path =
          (fs::path(clean_dir) / (spec.id + ".wav")).string();
      const std::string prot_path =
          (fs::path(protected_dir) / (spec.id + ".wav")).string();
      if (!fs::exists(clean_path))
        throw IngestionError("missing clean file: " + clean_path);
      if (!fs::exists(prot_path))
        throw IngestionError("missing protected file: " + prot_path);

      const Waveform clean = LoadCanonical(clean_path);
      Waveform prot = LoadCanonical(prot_path);

      row.sim = CosineSimilarity(Embed(config.encoder, clean),
                                 Embed(config.encoder, prot));
      row.stoi = ComputeStoi(clean, prot);
      row.mcd = ComputeMcd(clean, AlignLength(prot, clean.samples.size()));
      if (!config.asr_cmd.empty() && corpus.transcripts[i].has_value()) {
        const Transcript ref =
            NormalizeTranscript(spec.id, *corpus.transcripts[i]);
        const Transcript hyp =
            RunAsrHook(config.asr_cmd, prot_path, spec.id);
        row.wer = ComputeWer(ref, hyp);
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.message = e.what();
      Warn("evaluate failed for utterance " + spec.id + ": " + e.what());
    }
  });

  const std::vector<double> sims = ValidValues(rows, &EvalRow::sim);

  json report = MakeReportEnvelope(config, "evaluate", clock.Seconds());
  report["per_sample"] = json::array();
  for (const auto& row : rows) {
    report["per_sample"].push_back({{"utterance_id", row.id},
                                    {"status", row.ok ? "ok" : "error"},
                                    {"message", row.message},
                                    {"sim", JsonNumberOrNull(row.sim)},
                                    {"stoi", JsonNumberOrNull(row.stoi)},
                                    {"mcd", JsonNumberOrNull(row.mcd)},
                                    {"wer", JsonNumberOrNull(row.wer)},
                                    {"pesq", nullptr}});
  }
  report["aggregates"] = {
      {"sim", AggregateMetric(sims, config.seed, "sim")},
      {"stoi",
       AggregateMetric(ValidValues(rows, &EvalRow::stoi), config.seed,
                       "stoi")},
      {"mcd", AggregateMetric(ValidValues(rows, &EvalRow::mcd), config.seed,
                              "mcd")},
      {"wer", AggregateMetric(ValidValues(rows, &EvalRow::wer), config.seed,
                              "wer")}};

  // Clean-vs-protected similarity test. The clean arm is the explicit
  // clean-vs-clean convention: each sample's self-similarity is exactly 1.
  json tests;
  if (sims.size() >= 2) {
    const std::vector<double> clean_arm(sims.size(), 1.0);
    Rng rng(Rng::DeriveSeed(config.seed, "permutation:evaluate"));
    const TestResult t =
        PermutationTest(sims, clean_arm, kStatIterations, &rng);
    tests["clean_vs_protected"] = {
        {"statistic", t.statistic},
        {"p_value", t.p_value},
        {"p_normal_approx", JsonNumberOrNull(NormalApproxPValue(sims,
                                                                clean_arm))},
        {"cohens_d", JsonNumberOrNull(t.cohens_d)},
        {"iterations", t.iterations},
        {"exhaustive", t.exhaustive}};
  } else {
    tests["clean_vs_protected"] = nullptr;
  }
  report["tests"] = tests;
  if (!sims.empty()) {
    report["attack_success_rate"] = {
        {"threshold", kAttackSuccessThreshold},
        {"rate", AttackSuccessRate(sims, kAttackSuccessThreshold)}};
  } else {
    report["attack_success_rate"] = nullptr;
  }

  fs::create_directories(config.output_dir);
  WriteTextFile(
      (fs::path(config.output_dir) / "evaluate_report.json").string(),
      report.dump(2) + "\n");

  std::string csv = "utterance_id,status,sim,stoi,mcd,wer\n";
  bool all_ok = true;
  for (const auto& row : rows) {
    all_ok = all_ok && row.ok;
    csv += row.id;
    csv += row.ok ? ",ok," : ",error,";
    csv += FormatDouble(row.sim) + "," + FormatDouble(row.stoi) + "," +
           FormatDouble(row.mcd) + "," + FormatDouble(row.wer) + "\n";
  }
  WriteTextFile(
      (fs::path(config.output_dir) / "evaluate_summary.csv").string(), csv);
  return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// robustness
// ---------------------------------------------------------------------------

int CmdRobustness(const ExperimentConfig& config, const std::string& clean_dir,
                  const std::string& protected_dir) {
  const WallClock clock;
  const LoadedCorpus corpus = LoadCorpus(config);
  if (corpus.specs.empty())
    throw ConfigError("speech manifest lists no utterances");

  // Countermeasure list always leads with the unprocessed baseline row.
  std::vector<Countermeasure> cms = config.countermeasures;
  if (cms.empty() ||
      cms.front().kind != CountermeasureKind::kNone) {
    cms.insert(cms.begin(), Countermeasure::None());
  }

  struct Sample {
    std::string id;
    bool ok = false;
    std::string message;
    Waveform clean, protected_audio;
    Embedding clean_emb;
    std::optional<std::string> transcript;
  };
  std::vector<Sample> samples(corpus.specs.size());
  RunParallel(corpus.specs.size(), config.jobs, [&](size_t i) {
    Sample& s = samples[i];
    s.id = corpus.specs[i].id;
    s.transcript = corpus.transcripts[i];
    try {
      const std::string clean_path =
          (fs::path(clean_dir) / (s.id + ".wav")).string();
      const std::string prot_path =
          (fs::path(protected_dir) / (s.id + ".wav")).string();
      if (!fs::exists(clean_path))
        throw IngestionError("missing clean file: " + clean_path);
      if (!fs::exists(prot_path))
        throw IngestionError("missing protected file: " + prot_path);
      s.clean = LoadCanonical(clean_path);
      s.protected_audio = LoadCanonical(prot_path);
      s.clean_emb = Embed(config.encoder, s.clean);
      s.ok = true;
    } catch (const std::exception& e) {
      s.message = e.what();
      Warn("robustness: sample " + s.id + " excluded: " + e.what());
    }
  });

  struct MatrixRow {
    std::string name;
    bool skipped = false;
    double sim_mean = Nan();
    double delta_sim = Nan();
    double stoi_mean = Nan();
    double wer_mean = Nan();
  };
  std::vector<MatrixRow> matrix;
  double baseline_sim = Nan();

  const auto tmp_dir = fs::temp_directory_path();
  std::atomic<uint64_t> tmp_counter{0};

  for (const auto& raw_cm : cms) {
    MatrixRow row;
    row.name = raw_cm.Name();
    const auto resolved = ResolveCountermeasure(config, raw_cm);
    if (!resolved.has_value()) {
      row.skipped = true;
      matrix.push_back(row);
      continue;
    }

    std::vector<double> sims, stois, wers;
    std::vector<size_t> active;
    for (size_t i = 0; i < samples.size(); ++i)
      if (samples[i].ok) active.push_back(i);

    std::vector<double> sim_v(active.size(), Nan());
    std::vector<double> stoi_v(active.size(), Nan());
    std::vector<double> wer_v(active.size(), Nan());
    RunParallel(active.size(), config.jobs, [&](size_t a) {
      const Sample& s = samples[active[a]];
      try {
        const Waveform processed =
            ApplyCountermeasure(*resolved, s.protected_audio);
        sim_v[a] = CosineSimilarity(s.clean_emb,
                                    Embed(config.encoder, processed));
        stoi_v[a] = ComputeStoi(s.clean, processed);
        if (!config.asr_cmd.empty() && s.transcript.has_value()) {
          const std::string wav_path =
              (tmp_dir / ("sceneguard_robust_" +
                          std::to_string(::getpid()) + "_" +
                          std::to_string(tmp_counter.fetch_add(1)) + ".wav"))
                  .string();
          WriteWav(processed, wav_path);
          const Transcript hyp = RunAsrHook(config.asr_cmd, wav_path, s.id);
          fs::remove(wav_path);
          wer_v[a] = ComputeWer(NormalizeTranscript(s.id, *s.transcript), hyp);
        }
      } catch (const std::exception& e) {
        Warn("robustness: " + row.name + " failed on " + s.id + ": " +
             e.what());
      }
    });
    for (const double v : sim_v)
      if (!std::isnan(v)) sims.push_back(v);
    for (const double v : stoi_v)
      if (!std::isnan(v)) stois.push_back(v);
    for (const double v : wer_v)
      if (!std::isnan(v)) wers.push_back(v);

    row.sim_mean = MeanOf(sims);
    row.stoi_mean = MeanOf(stois);
    row.wer_mean = wers.empty() ? Nan() : MeanOf(wers);
    if (raw_cm.kind == CountermeasureKind::kNone) baseline_sim = row.sim_mean;
    row.delta_sim = row.sim_mean - baseline_sim;
    matrix.push_back(row);
  }

  json report = MakeReportEnvelope(config, "robustness", clock.Seconds());
  report["matrix"] = json::array();
  for (const auto& row : matrix) {
    report["matrix"].push_back({{"countermeasure", row.name},
                                {"skipped", row.skipped},
                                {"sim_mean", JsonNumberOrNull(row.sim_mean)},
                                {"delta_sim", JsonNumberOrNull(row.delta_sim)},
                                {"stoi_mean", JsonNumberOrNull(row.stoi_mean)},
                                {"wer_mean", JsonNumberOrNull(row.wer_mean)}});
  }
  report["excluded"] = json::array();
  bool all_ok = true;
  for (const auto& s : samples) {
    if (!s.ok) {
      all_ok = false;
      report["excluded"].push_back(
          {{"utterance_id", s.id}, {"message", s.message}});
    }
  }

  fs::create_directories(config.output_dir);
  WriteTextFile(
      (fs::path(config.output_dir) / "robustness_report.json").string(),
      report.dump(2) + "\n");

  std::string csv = "countermeasure,skipped,sim_mean,delta_sim,stoi_mean,wer_mean\n";
  for (const auto& row : matrix) {
    csv += row.name;
    csv += row.skipped ? ",yes," : ",no,";
    csv += FormatDouble(row.sim_mean) + "," + FormatDouble(row.delta_sim) +
           "," + FormatDouble(row.stoi_mean) + "," +
           FormatDouble(row.wer_mean) + "\n";
  }
  WriteTextFile(
      (fs::path(config.output_dir) / "robustness_summary.csv").string(), csv);
  return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

namespace {

struct AblateSampleResult {
  bool ok = false;
  std::string message;
  double sim = Nan();
  double stoi = Nan();
  double mask_smoothness = Nan();
};

// Protects one utterance under the given optimizer config and scores it with
// the builtin encoder. `variant` keys the rng substream; `direct` switches
// to the unoptimized baseline. A fixed noise window is reused across paired
// variants by deriving the noise stream from the utterance alone.
AblateSampleResult RunAblateSample(const ExperimentConfig& config,
                                   const NoiseLibrary* lib,
                                   const UtteranceSpec& spec,
                                   const OptimConfig& optim,
                                   const std::string& variant, bool direct) {
  AblateSampleResult out;
  try {
    const Waveform speech = LoadCanonical(spec.wav_path);
    Rng noise_rng(Rng::DeriveSeed(config.seed, "ablate-noise:" + spec.id));
    NoiseClip clip = PickNoise(config, lib, spec, speech.samples.size(),
                               &noise_rng);
    // Length-match once so that paired variants see the identical noise.
    clip.audio = MatchLength(clip, speech.samples.size(), &noise_rng);

    Rng rng(Rng::DeriveSeed(config.seed,
                            "ablate:" + variant + ":" + spec.id));
    const ProtectionResult result = direct
                                        ? ProtectDirect(speech, clip, optim,
                                                        &rng)
                                        : Protect(speech, clip, optim, &rng);
    out.sim = CosineSimilarity(EmbedBuiltin(speech),
                               EmbedBuiltin(result.protected_audio));
    out.stoi = ComputeStoi(speech, result.protected_audio);
    out.mask_smoothness = MaskSmoothnessMean(result.final_mask);
    out.ok = true;
  } catch (const std::exception& e) {
    out.message = e.what();
    Warn("ablate sample " + spec.id + " (" + variant + ") failed: " +
         e.what());
  }
  return out;
}

}  // namespace

int CmdAblate(const ExperimentConfig& config, AblateMode mode) {
  const WallClock clock;
  const LoadedCorpus corpus = LoadCorpus(config);
  if (corpus.specs.empty())
    throw ConfigError("speech manifest lists no utterances");

  NoiseLibrary lib;
  if (config.noise_source == "scene")
    lib = LoadNoiseLibrary(config.noise_manifest, config.allowed_scenes);

  json report;
  std::string csv;
  std::string mode_name;
  bool all_ok = true;

  if (mode == AblateMode::kSnrSweep) {
    mode_name = "snr_sweep";
    const std::vector<std::pair<double, double>> ranges = {
        {5.0, 10.0}, {10.0, 20.0}, {15.0, 25.0}, {20.0, 30.0}};
    json rows = json::array();
    csv = "snr_min_db,snr_max_db,sim_mean,stoi_mean,n\n";
    for (const auto& [lo, hi] : ranges) {
      OptimConfig optim = config.optim;
      optim.snr_min_db = lo;
      optim.snr_max_db = hi;
      const std::string variant =
          "snr[" + FormatDouble(lo) + "," + FormatDouble(hi) + "]";
      std::vector<AblateSampleResult> results(corpus.specs.size());
      RunParallel(corpus.specs.size(), config.jobs, [&](size_t i) {
        results[i] = RunAblateSample(config, &lib, corpus.specs[i], optim,
                                     variant, /*direct=*/false);
      });
      std::vector<double> sims, stois;
      for (const auto& r : results) {
        all_ok = all_ok && r.ok;
        if (r.ok) {
          sims.push_back(r.sim);
          stois.push_back(r.stoi);
        }
      }
      rows.push_back({{"snr_min_db", lo},
                      {"snr_max_db", hi},
                      {"sim_mean", JsonNumberOrNull(MeanOf(sims))},
                      {"stoi_mean", JsonNumberOrNull(MeanOf(stois))},
                      {"n", sims.size()}});
      csv += FormatDouble(lo) + "," + FormatDouble(hi) + "," +
             FormatDouble(MeanOf(sims)) + "," + FormatDouble(MeanOf(stois)) +
             "," + std::to_string(sims.size()) + "\n";
    }
    report = MakeReportEnvelope(config, "ablate:snr_sweep", clock.Seconds());
    report["rows"] = rows;
  } else if (mode == AblateMode::kOptimization) {
    mode_name = "optimization";
    std::vector<AblateSampleResult> optimized(corpus.specs.size());
    std::vector<AblateSampleResult> direct(corpus.specs.size());
    RunParallel(corpus.specs.size(), config.jobs, [&](size_t i) {
      optimized[i] = RunAblateSample(config, &lib, corpus.specs[i],
                                     config.optim, "optimized",
                                     /*direct=*/false);
      direct[i] = RunAblateSample(config, &lib, corpus.specs[i], config.optim,
                                  "direct", /*direct=*/true);
    });

    std::vector<double> sims_opt, sims_dir, stois_opt, stois_dir, deltas;
    for (size_t i = 0; i < corpus.specs.size(); ++i) {
      all_ok = all_ok && optimized[i].ok && direct[i].ok;
      if (optimized[i].ok && direct[i].ok) {
        sims_opt.push_back(optimized[i].sim);
        sims_dir.push_back(direct[i].sim);
        stois_opt.push_back(optimized[i].stoi);
        stois_dir.push_back(direct[i].stoi);
        deltas.push_back(optimized[i].sim - direct[i].sim);
      }
    }

    report = MakeReportEnvelope(config, "ablate:optimization",
                                clock.Seconds());
    report["arms"] = {
        {"optimized",
         {{"sim_mean", JsonNumberOrNull(MeanOf(sims_opt))},
          {"stoi_mean", JsonNumberOrNull(MeanOf(stois_opt))}}},
        {"direct",
         {{"sim_mean", JsonNumberOrNull(MeanOf(sims_dir))},
          {"stoi_mean", JsonNumberOrNull(MeanOf(stois_dir))}}}};
    if (deltas.size() >= 2) {
      Rng rng(Rng::DeriveSeed(config.seed, "permutation:ablate-optimization"));
      const TestResult t =
          PairedPermutationTest(deltas, kStatIterations, &rng);
      report["paired_test"] = {{"statistic", t.statistic},
                               {"p_value", t.p_value},
                               {"cohens_d", JsonNumberOrNull(t.cohens_d)},
                               {"iterations", t.iterations},
                               {"exhaustive", t.exhaustive}};
    } else {
      report["paired_test"] = nullptr;
    }
    csv = "arm,sim_mean,stoi_mean,n\n";
    csv += "optimized," + FormatDouble(MeanOf(sims_opt)) + "," +
           FormatDouble(MeanOf(stois_opt)) + "," +
           std::to_string(sims_opt.size()) + "\n";
    csv += "direct," + FormatDouble(MeanOf(sims_dir)) + "," +
           FormatDouble(MeanOf(stois_dir)) + "," +
           std::to_string(sims_dir.size()) + "\n";
  } else {
    mode_name = "hyperparameter";
    struct HyperConfig {
      std::string group;
      std::string label;
      OptimConfig optim;
    };
    std::vector<HyperConfig> settings;
    for (const double lambda : {0.001, 0.01, 0.1}) {
      HyperConfig h{"lambda_reg", "lambda_reg=" + FormatDouble(lambda),
                    config.optim};
      h.optim.lambda_reg = lambda;
      settings.push_back(h);
    }
    for (const int epochs : {20, 50, 100}) {
      HyperConfig h{"epochs", "epochs=" + std::to_string(epochs),
                    config.optim};
      h.optim.epochs = epochs;
      settings.push_back(h);
    }

    json rows = json::array();
    csv = "group,setting,sim_mean,stoi_mean,mask_smoothness_mean,"
          "wall_clock_sec,n\n";
    for (const auto& setting : settings) {
      const WallClock sub_clock;
      // All settings share per-utterance streams: identical noise and
      // initialization, so rows differ only through the configuration and
      // the shared default point is literally the same run in both groups.
      std::vector<AblateSampleResult> results(corpus.specs.size());
      RunParallel(corpus.specs.size(), config.jobs, [&](size_t i) {
        results[i] = RunAblateSample(config, &lib, corpus.specs[i],
                                     setting.optim, "hyper",
                                     /*direct=*/false);
      });
      std::vector<double> sims, stois, smooth;
      for (const auto& r : results) {
        all_ok = all_ok && r.ok;
        if (r.ok) {
          sims.push_back(r.sim);
          stois.push_back(r.stoi);
          smooth.push_back(r.mask_smoothness);
        }
      }
      const double wall = sub_clock.Seconds();
      rows.push_back(
          {{"group", setting.group},
           {"setting", setting.label},
           {"lambda_reg", setting.optim.lambda_reg},
           {"epochs", setting.optim.epochs},
           {"sim_mean", JsonNumberOrNull(MeanOf(sims))},
           {"stoi_mean", JsonNumberOrNull(MeanOf(stois))},
           {"mask_smoothness_mean", JsonNumberOrNull(MeanOf(smooth))},
           {"wall_clock_sec", wall},
           {"n", sims.size()}});
      csv += setting.group + "," + setting.label + "," +
             FormatDouble(MeanOf(sims)) + "," + FormatDouble(MeanOf(stois)) +
             "," + FormatDouble(MeanOf(smooth)) + "," + FormatDouble(wall) +
             "," + std::to_string(sims.size()) + "\n";
    }
    report = MakeReportEnvelope(config, "ablate:hyperparameter",
                                clock.Seconds());
    report["rows"] = rows;
  }

  report["wall_clock_sec"] = clock.Seconds();
  fs::create_directories(config.output_dir);
  WriteTextFile((fs::path(config.output_dir) /
                 ("ablate_" + mode_name + "_report.json"))
                    .string(),
                report.dump(2) + "\n");
  WriteTextFile((fs::path(config.output_dir) /
                 ("ablate_" + mode_name + "_summary.csv"))
                    .string(),
                csv);
  return all_ok ? 0 : 1;
}

}  // namespace sceneguard
