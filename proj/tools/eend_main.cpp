// eend: end-to-end speaker diarization with encoder-decoder attractors.
// Subcommands cover the full pipeline: corpus simulation, feature
// extraction, training, inference, hypothesis combination and scoring.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "eend/combine.hpp"
#include "eend/features.hpp"
#include "eend/inference.hpp"
#include "eend/model.hpp"
#include "eend/rttm.hpp"
#include "eend/scoring.hpp"
#include "eend/simulate.hpp"
#include "eend/trainer.hpp"
#include "eend/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!is) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return h;
}

std::string hex64(std::uint64_t h) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

// One manifest per artifact-producing run: config snapshot, seed, hashes,
// command line, timestamp. Timestamps make manifests the one artifact
// excluded from bit-identity comparisons.
void write_run_manifest(const std::string& path, const std::string& command,
                        const json& config, std::uint64_t seed,
                        const std::map<std::string, std::string>& artifact_hashes,
                        const std::vector<std::string>& argv_snapshot) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["argv"] = argv_snapshot;
  json hashes = json::object();
  for (const auto& [k, v] : artifact_hashes) hashes[k] = v;
  m["artifact_hashes"] = hashes;
  m["timestamp_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  std::ofstream os(path, std::ios::binary);
  os << m.dump(2) << "\n";
}

eend::FeatureSequence featurize_wav(const std::string& path, std::size_t factor,
                                    bool mean_norm) {
  eend::AudioClip clip = eend::read_wav(path);
  if (clip.sample_rate == 16000) clip = eend::downsample_by_two(clip);
  if (clip.sample_rate != 8000)
    throw eend::InputError("expected 8 kHz or 16 kHz audio, got " +
                           std::to_string(clip.sample_rate) + " Hz");
  auto feats = eend::splice_subsample(eend::log_mel(clip), 7, factor);
  if (mean_norm) eend::mean_normalize(feats);
  return feats;
}

eend::FeatureSequence load_input_features(const std::string& path, std::size_t factor,
                                          bool mean_norm) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".wav")
    return featurize_wav(path, factor, mean_norm);
  return eend::read_features(path);
}

eend::SadLabels load_sad(const std::string& path, double frame_period, std::size_t frames) {
  eend::SadLabels sad;
  sad.frame_period = frame_period;
  sad.z.assign(frames, 0);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".lab") {
    auto labels = eend::read_labels(path);
    if (labels.num_frames != frames)
      throw eend::InputError("SAD label frame count does not match the recording");
    for (std::size_t t = 0; t < frames; ++t) sad.z[t] = labels.active_count(t) > 0 ? 1 : 0;
  } else {
    auto anns = eend::parse_rttm_file(path);
    if (anns.empty()) return sad;
    auto y = eend::rasterize(anns[0], frame_period, frames);
    for (std::size_t t = 0; t < frames; ++t) sad.z[t] = y.active_count(t) > 0 ? 1 : 0;
  }
  return sad;
}

struct ScoreRow {
  std::string rec;
  eend::DerBreakdown der;
  double jer = -1.0;
  std::size_t jer_speakers = 0;
};

void print_score_report(std::ostream& os, const std::vector<ScoreRow>& rows, bool with_jer) {
  os << "recording\tspeech_s\tmiss_s\tfa_s\tconf_s\tder_pct";
  if (with_jer) os << "\tjer_pct";
  os << "\n";
  char buf[256];
  double speech = 0, miss = 0, fa = 0, conf = 0, jer_sum = 0;
  std::size_t jer_n = 0;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%.3f\t%.3f\t%.3f\t%.3f\t%.2f", r.rec.c_str(),
                  r.der.speech, r.der.missed, r.der.false_alarm, r.der.confusion,
                  100.0 * r.der.der);
    os << buf;
    if (with_jer) {
      std::snprintf(buf, sizeof buf, "\t%.2f", 100.0 * r.jer);
      os << buf;
    }
    os << "\n";
    speech += r.der.speech;
    miss += r.der.missed;
    fa += r.der.false_alarm;
    conf += r.der.confusion;
    jer_sum += r.jer * static_cast<double>(r.jer_speakers);
    jer_n += r.jer_speakers;
  }
  double total_der = speech > 0 ? (miss + fa + conf) / speech : 0.0;
  std::snprintf(buf, sizeof buf, "TOTAL\t%.3f\t%.3f\t%.3f\t%.3f\t%.2f", speech, miss, fa, conf,
                100.0 * total_der);
  os << buf;
  if (with_jer) {
    std::snprintf(buf, sizeof buf, "\t%.2f", jer_n ? 100.0 * jer_sum / jer_n : 0.0);
    os << buf;
  }
  os << "\n";
}

int run_simulate(const eend::SimConfig& cfg, const std::string& out_dir, std::size_t jobs,
                 const std::vector<std::string>& argv_snapshot) {
  if (jobs <= 1 || cfg.num_mixtures < 2) {
    eend::generate_corpus(cfg, out_dir);
  } else {
    // per-mixture derived seeds make parallel generation byte-identical to
    // the sequential path; only the worker that owns an index writes it
    fs::create_directories(out_dir);
    std::vector<std::thread> workers;
    std::vector<std::string> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          eend::Rng base(cfg.seed);
          char name[64];
          for (std::size_t i = w; i < cfg.num_mixtures; i += jobs) {
            std::snprintf(name, sizeof name, "mix_%06zu", i);
            eend::Rng stream = base.derive(i);
            eend::Mixture mix = eend::build_mixture(cfg, stream, name);
            eend::write_features(mix.features,
                                 (fs::path(out_dir) / (std::string(name) + ".feat")).string());
            eend::write_labels(mix.labels,
                               (fs::path(out_dir) / (std::string(name) + ".lab")).string());
            if (cfg.mode == eend::SimMode::kWaveform)
              eend::write_wav(mix.audio,
                              (fs::path(out_dir) / (std::string(name) + ".wav")).string());
          }
        } catch (const std::exception& e) {
          errors[w] = e.what();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
      if (!e.empty()) throw eend::IoError("simulate worker failed: " + e);
    // manifest + reference rttm are cheap; rebuild them serially
    eend::Rng base(cfg.seed);
    std::vector<eend::Annotation> refs;
    std::ofstream manifest((fs::path(out_dir) / "manifest.txt").string(), std::ios::binary);
    char name[64];
    for (std::size_t i = 0; i < cfg.num_mixtures; ++i) {
      std::snprintf(name, sizeof name, "mix_%06zu", i);
      eend::Rng stream = base.derive(i);
      refs.push_back(eend::sample_timeline(cfg, stream, name));
      manifest << (fs::path(out_dir) / (std::string(name) + ".feat")).string() << '\t'
               << (fs::path(out_dir) / (std::string(name) + ".lab")).string() << '\t' << name
               << '\n';
    }
    eend::emit_rttm_file(refs, (fs::path(out_dir) / "ref.rttm").string());
  }

  json cfg_json{{"nspk", cfg.num_speakers},
                {"count", cfg.num_mixtures},
                {"beta", cfg.beta},
                {"mode", cfg.mode == eend::SimMode::kFeature ? "feature" : "waveform"},
                {"feat_dim", cfg.feat_dim},
                {"frame_period", cfg.frame_period},
                {"fixed_frames", cfg.fixed_frames},
                {"min_utts", cfg.min_utterances},
                {"max_utts", cfg.max_utterances},
                {"min_dur", cfg.min_utterance_sec},
                {"max_dur", cfg.max_utterance_sec}};
  std::map<std::string, std::string> hashes;
  hashes["ref.rttm"] = hex64(fnv1a_file((fs::path(out_dir) / "ref.rttm").string()));
  write_run_manifest((fs::path(out_dir) / "run_manifest.json").string(), "simulate", cfg_json,
                     cfg.seed, hashes, argv_snapshot);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> argv_snapshot(argv, argv + argc);
  CLI::App app{"end-to-end speaker diarization with encoder-decoder attractors"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags take precedence");
  std::size_t jobs = 1;
  app.add_option("--jobs", jobs, "worker threads for per-recording parallel stages")
      ->check(CLI::Range(std::size_t{1}, std::size_t{64}));

  // ---- simulate ----
  auto* sim_cmd = app.add_subcommand("simulate", "generate a simulated multi-talker corpus");
  eend::SimConfig sim;
  std::string sim_out = "corpus";
  std::string sim_mode = "feature";
  sim_cmd->add_option("--nspk", sim.num_speakers, "speakers per mixture")->required();
  sim_cmd->add_option("--beta", sim.beta, "mean silence gap in seconds");
  sim_cmd->add_option("--count", sim.num_mixtures, "number of mixtures")->required();
  sim_cmd->add_option("--seed", sim.seed, "corpus seed");
  sim_cmd->add_option("--mode", sim_mode, "feature|waveform")
      ->check(CLI::IsMember({"feature", "waveform"}));
  sim_cmd->add_option("-o,--out", sim_out, "output directory");
  sim_cmd->add_option("--feat-dim", sim.feat_dim, "feature dimension (feature mode)");
  sim_cmd->add_option("--frame-period", sim.frame_period, "feature frame period seconds");
  sim_cmd->add_option("--fixed-frames", sim.fixed_frames, "crop mixtures to exactly N frames");
  sim_cmd->add_option("--min-utts", sim.min_utterances, "min utterances per speaker");
  sim_cmd->add_option("--max-utts", sim.max_utterances, "max utterances per speaker");
  sim_cmd->add_option("--min-dur", sim.min_utterance_sec, "min utterance seconds");
  sim_cmd->add_option("--max-dur", sim.max_utterance_sec, "max utterance seconds");
  sim_cmd->add_option("--profile-scale", sim.profile_scale, "speaker profile spread");
  sim_cmd->add_option("--draw-noise", sim.draw_noise, "per-frame draw noise");

  // ---- featurize ----
  auto* feat_cmd = app.add_subcommand("featurize", "extract features from a wav file");
  std::string feat_wav, feat_out;
  std::size_t feat_factor = 10;
  bool feat_no_norm = false;
  feat_cmd->add_option("--wav", feat_wav, "input wav (8 kHz, or 16 kHz to be downsampled)")
      ->required();
  feat_cmd->add_option("--out", feat_out, "output .feat file")->required();
  feat_cmd->add_option("--factor", feat_factor, "subsampling factor (10 or 5)")
      ->check(CLI::IsMember({5, 10}));
  feat_cmd->add_flag("--no-mean-norm", feat_no_norm, "skip per-recording mean normalization");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a model on a corpus manifest");
  std::string train_manifest, train_out = "run", train_init, train_order = "shuffled",
              train_routing = "stop", train_lr_mode = "noam";
  eend::TrainConfig tc;
  eend::ModelConfig mc;
  mc.model_dim = 256;
  std::uint64_t model_seed = 0;
  train_cmd->add_option("--manifest", train_manifest, "corpus manifest")->required();
  train_cmd->add_option("--out", train_out, "output directory");
  train_cmd->add_option("--init", train_init, "initial checkpoint (adaptation)");
  train_cmd->add_option("--epochs", tc.epochs, "training epochs");
  train_cmd->add_option("--batch", tc.batch_size, "chunks per optimizer step");
  train_cmd->add_option("--chunk", tc.chunk_frames, "chunk length in frames");
  train_cmd->add_option("--seed", tc.seed, "training seed (data order, shuffles, init)");
  train_cmd->add_option("--alpha", tc.alpha, "existence loss weight");
  train_cmd->add_option("--order", train_order, "EDA input order: shuffled|chronological")
      ->check(CLI::IsMember({"shuffled", "chronological"}));
  train_cmd->add_option("--grad-routing", train_routing,
                        "existence-loss routing: stop|full")
      ->check(CLI::IsMember({"stop", "full"}));
  train_cmd->add_option("--lr-mode", train_lr_mode, "noam|fixed")
      ->check(CLI::IsMember({"noam", "fixed"}));
  train_cmd->add_option("--warmup", tc.warmup_steps, "warmup steps of the noam schedule");
  train_cmd->add_option("--lr", tc.fixed_lr, "fixed learning rate (lr-mode fixed)");
  train_cmd->add_option("--feat-dim", mc.feat_dim, "input feature dimension");
  train_cmd->add_option("--model-dim", mc.model_dim, "embedding dimension D");
  train_cmd->add_option("--blocks", mc.num_blocks, "encoder blocks");
  train_cmd->add_option("--heads", mc.num_heads, "attention heads");

  // ---- infer ----
  auto* infer_cmd = app.add_subcommand("infer", "diarize a recording");
  std::string infer_model, infer_input, infer_out = "hyp.rttm", infer_sad = "none",
              infer_mode = "plain", infer_rec_id;
  std::size_t infer_smax = 2, infer_factor = 10;
  double infer_tau = 0.5;
  std::uint64_t infer_seed = 0;
  bool infer_no_shuffle = false, infer_no_norm = false;
  infer_cmd->add_option("--model", infer_model, "model checkpoint")->required();
  infer_cmd->add_option("--input", infer_input, "input .feat or .wav")->required();
  infer_cmd->add_option("--out", infer_out, "output hypothesis rttm");
  infer_cmd->add_option("--sad", infer_sad, "external SAD (.lab or rttm), or 'none'");
  infer_cmd->add_option("--mode", infer_mode, "plain|iterative|iterative-plus")
      ->check(CLI::IsMember({"plain", "iterative", "iterative-plus"}));
  infer_cmd->add_option("--smax", infer_smax, "max speakers per decoding round");
  infer_cmd->add_option("--tau", infer_tau, "attractor existence threshold");
  infer_cmd->add_option("--seed", infer_seed, "shuffle seed");
  infer_cmd->add_option("--rec-id", infer_rec_id, "recording id for the rttm");
  infer_cmd->add_option("--factor", infer_factor, "feature subsampling factor for wav input")
      ->check(CLI::IsMember({5, 10}));
  infer_cmd->add_flag("--no-shuffle", infer_no_shuffle, "chronological EDA input");
  infer_cmd->add_flag("--no-mean-norm", infer_no_norm, "skip mean normalization for wav input");

  // ---- combine ----
  auto* combine_cmd = app.add_subcommand("combine", "fuse diarization hypotheses");
  std::vector<std::string> combine_inputs;
  std::string combine_out = "fused.rttm";
  double combine_fp = 0.05;
  combine_cmd->add_option("inputs", combine_inputs, "hypothesis rttm files")
      ->required()
      ->expected(-1);
  combine_cmd->add_option("-o,--out", combine_out, "fused output rttm");
  combine_cmd->add_option("--frame-period", combine_fp, "voting frame resolution seconds");

  // ---- score ----
  auto* score_cmd = app.add_subcommand("score", "diarization error rate scoring");
  std::string score_ref, score_hyp, score_out;
  double score_collar = 0.25;
  bool score_jer = false;
  score_cmd->add_option("--ref", score_ref, "reference rttm")->required();
  score_cmd->add_option("--hyp", score_hyp, "hypothesis rttm")->required();
  score_cmd->add_option("--collar", score_collar, "collar seconds");
  score_cmd->add_flag("--jer", score_jer, "also report Jaccard error rate");
  score_cmd->add_option("-o,--out", score_out, "write the report here as well");

  // ---- count ----
  auto* count_cmd = app.add_subcommand("count", "speaker counting confusion matrix");
  std::string count_ref, count_hyp, count_out;
  count_cmd->add_option("--ref", count_ref, "reference rttm")->required();
  count_cmd->add_option("--hyp", count_hyp, "hypothesis rttm")->required();
  count_cmd->add_option("-o,--out", count_out, "write the matrix here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
  }

  try {
    if (sim_cmd->parsed()) {
      sim.mode = sim_mode == "waveform" ? eend::SimMode::kWaveform : eend::SimMode::kFeature;
      return run_simulate(sim, sim_out, jobs, argv_snapshot);
    }

    if (feat_cmd->parsed()) {
      auto feats = featurize_wav(feat_wav, feat_factor, !feat_no_norm);
      eend::write_features(feats, feat_out);
      json cfg{{"wav", feat_wav}, {"factor", feat_factor}, {"mean_norm", !feat_no_norm}};
      std::map<std::string, std::string> hashes{{feat_out, hex64(fnv1a_file(feat_out))}};
      write_run_manifest(feat_out + ".run.json", "featurize", cfg, 0, hashes, argv_snapshot);
      return 0;
    }

    if (train_cmd->parsed()) {
      tc.order = train_order == "shuffled" ? eend::EdaInputOrder::kShuffled
                                           : eend::EdaInputOrder::kChronological;
      tc.stop_gradient_existence = train_routing == "stop";
      tc.lr_mode = train_lr_mode == "noam" ? eend::LrMode::kNoam : eend::LrMode::kFixed;
      model_seed = tc.seed;

      std::size_t skipped = 0;
      auto corpus = eend::load_manifest(train_manifest, tc.max_skip_fraction, &skipped);
      eend::EendEdaModel model = train_init.empty()
                                     ? eend::EendEdaModel(mc, model_seed)
                                     : eend::EendEdaModel::load(train_init);
      auto result = eend::train(model, corpus, tc, train_out);
      std::fprintf(stderr, "trained %zu epochs, %zu steps, final loss %.6f\n",
                   result.epoch_means.size(), result.total_steps,
                   result.epoch_means.empty() ? 0.0 : result.epoch_means.back().total);

      json cfg{{"manifest", train_manifest},
               {"epochs", tc.epochs},
               {"batch", tc.batch_size},
               {"chunk", tc.chunk_frames},
               {"alpha", tc.alpha},
               {"order", train_order},
               {"grad_routing", train_routing},
               {"lr_mode", train_lr_mode},
               {"warmup", tc.warmup_steps},
               {"lr", tc.fixed_lr},
               {"init", train_init},
               {"feat_dim", model.config().feat_dim},
               {"model_dim", model.config().model_dim},
               {"blocks", model.config().num_blocks},
               {"heads", model.config().num_heads},
               {"skipped_items", skipped}};
      std::string final_ckpt = (fs::path(train_out) / "final.ckpt").string();
      std::map<std::string, std::string> hashes{{"final.ckpt", hex64(fnv1a_file(final_ckpt))}};
      write_run_manifest((fs::path(train_out) / "run_manifest.json").string(), "train", cfg,
                         tc.seed, hashes, argv_snapshot);
      return 0;
    }

    if (infer_cmd->parsed()) {
      if (infer_sad != "none" && infer_mode != "plain") {
        std::cerr << "error: --sad applies to --mode plain only\n";
        return 2;
      }
      auto model = eend::EendEdaModel::load(infer_model);
      auto feats = load_input_features(infer_input, infer_factor, !infer_no_norm);
      std::string rec_id =
          infer_rec_id.empty() ? fs::path(infer_input).stem().string() : infer_rec_id;

      eend::EendEdaBackend backend(model, infer_tau, !infer_no_shuffle, infer_seed);
      eend::ActivityMatrix hyp;
      if (infer_mode == "plain") {
        if (infer_sad != "none") {
          auto out = backend.decode_frames(feats.frames);
          auto sad = load_sad(infer_sad, feats.frame_period, feats.num_frames());
          hyp = eend::sad_postprocess(out.posteriors, sad);
        } else {
          hyp = eend::plain_inference(feats.frames, backend, feats.frame_period);
        }
      } else if (infer_mode == "iterative") {
        hyp = eend::iterative_inference(feats.frames, backend, infer_smax, feats.frame_period);
      } else {
        hyp = eend::iterative_inference_plus(feats.frames, backend, infer_smax,
                                             feats.frame_period);
      }
      auto ann = eend::segmentize(hyp, rec_id);
      eend::emit_rttm_file({ann}, infer_out);

      json cfg{{"model", infer_model}, {"input", infer_input},   {"mode", infer_mode},
               {"sad", infer_sad},     {"smax", infer_smax},     {"tau", infer_tau},
               {"shuffle", !infer_no_shuffle}, {"factor", infer_factor}};
      std::map<std::string, std::string> hashes{
          {"model", hex64(fnv1a_file(infer_model))},
          {fs::path(infer_out).filename().string(), hex64(fnv1a_file(infer_out))}};
      write_run_manifest(infer_out + ".run.json", "infer", cfg, infer_seed, hashes,
                         argv_snapshot);
      return 0;
    }

    if (combine_cmd->parsed()) {
      std::vector<eend::Annotation> anns;
      double extent = 0.0;
      for (const auto& path : combine_inputs) {
        auto parsed = eend::parse_rttm_file(path);
        if (parsed.empty())
          anns.push_back(eend::Annotation{fs::path(path).stem().string(), {}});
        else
          anns.push_back(parsed[0]);
        extent = std::max(extent, anns.back().total_extent());
      }
      std::size_t frames = static_cast<std::size_t>(std::ceil(extent / combine_fp));
      frames = std::max<std::size_t>(frames, 1);
      std::vector<eend::Hypothesis> hyps;
      for (const auto& ann : anns)
        hyps.push_back({eend::rasterize(ann, combine_fp, frames), 1.0});
      auto fused = eend::combine_hypotheses(hyps);
      auto out_ann = eend::segmentize(fused, anns[0].recording_id);
      eend::emit_rttm_file({out_ann}, combine_out);

      json cfg{{"inputs", combine_inputs}, {"frame_period", combine_fp}};
      std::map<std::string, std::string> hashes{
          {fs::path(combine_out).filename().string(), hex64(fnv1a_file(combine_out))}};
      write_run_manifest(combine_out + ".run.json", "combine", cfg, 0, hashes, argv_snapshot);
      return 0;
    }

    if (score_cmd->parsed()) {
      auto refs = eend::parse_rttm_file(score_ref);
      auto hyps = eend::parse_rttm_file(score_hyp);
      std::map<std::string, const eend::Annotation*> hyp_by_id;
      for (const auto& h : hyps) hyp_by_id[h.recording_id] = &h;

      std::vector<ScoreRow> rows;
      for (const auto& ref : refs) {
        ScoreRow row;
        row.rec = ref.recording_id;
        eend::Annotation empty{ref.recording_id, {}};
        const eend::Annotation* hyp =
            hyp_by_id.count(ref.recording_id) ? hyp_by_id[ref.recording_id] : &empty;
        row.der = eend::der(ref, *hyp, score_collar);
        if (score_jer) {
          auto j = eend::jer(ref, *hyp);
          row.jer = j.jer;
          row.jer_speakers = j.per_speaker.size();
        }
        rows.push_back(row);
      }
      print_score_report(std::cout, rows, score_jer);
      if (!score_out.empty()) {
        std::ofstream os(score_out, std::ios::binary);
        print_score_report(os, rows, score_jer);
      }
      return 0;
    }

    if (count_cmd->parsed()) {
      auto refs = eend::parse_rttm_file(count_ref);
      auto hyps = eend::parse_rttm_file(count_hyp);
      std::map<std::string, std::size_t> hyp_counts;
      for (const auto& h : hyps) hyp_counts[h.recording_id] = h.speakers().size();
      std::vector<std::size_t> rc, hc;
      for (const auto& ref : refs) {
        rc.push_back(ref.speakers().size());
        hc.push_back(hyp_counts.count(ref.recording_id) ? hyp_counts[ref.recording_id] : 0);
      }
      auto cc = eend::counting_confusion(rc, hc);
      std::ostringstream report;
      report << "pred\\ref";
      for (std::size_t j = 0; j <= cc.max_count; ++j) report << "\t" << j;
      report << "\n";
      for (std::size_t i = 0; i <= cc.max_count; ++i) {
        report << i;
        for (std::size_t j = 0; j <= cc.max_count; ++j) report << "\t" << cc.matrix[i][j];
        report << "\n";
      }
      char acc[64];
      std::snprintf(acc, sizeof acc, "accuracy\t%.4f\n", cc.accuracy);
      report << acc;
      std::cout << report.str();
      if (!count_out.empty()) {
        std::ofstream os(count_out, std::ios::binary);
        os << report.str();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
