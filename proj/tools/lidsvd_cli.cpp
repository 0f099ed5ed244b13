// lidsvd command-line front end.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lidsvd/lidsvd.hpp"

namespace fs = std::filesystem;
using namespace lidsvd;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::io_failure, "output", "cannot write " + path.string());
  return os;
}

/// Writes to `path`, or stdout when empty.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
  } else {
    auto os = open_out(path);
    fn(os);
  }
}

pipeline::TrainedSystem load_model(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::file_not_found, "load", "model not found: " + path.string());
  return pipeline::load(path);
}

features::FeatureMatrix load_input(const fs::path& path, const pipeline::TrainedSystem* sys) {
  if (!fs::exists(path)) throw Error(Errc::file_not_found, "input", "input not found: " + path.string());
  if (path.extension() == ".wav") {
    pipeline::PipelineConfig fe;
    if (sys) {
      fe.mfcc = sys->mfcc;
      fe.vad = sys->vad;
      fe.vad_enabled = sys->vad_enabled;
    }
    return with_stage("front-end", [&] { return pipeline::front_end(audio::read_wav(path), fe); });
  }
  return with_stage("input", [&] { return pipeline::load_features(path); });
}

struct SynthArgs {
  std::string out = "corpus";
  std::string preset = "separated";
  int languages = 10;
  int speakers = 8;
  int sessions = 4;
  int first_speaker = 0;
  double duration = 180.0;
  int components = 8;
  int dim = 39;
  double stay = 0.8;
  double speaker_sd = 0.3;
  double speaker_style = 0.0;
  bool stream = false;
  int stream_languages = 4;
  int stream_segments = 3;
  int min_segment = 6;
  int max_segment = 30;
};

synthcorpus::CorpusSpec corpus_spec(const SynthArgs& a, std::uint64_t seed) {
  synthcorpus::LanguageSetOptions opt;
  opt.count = a.languages;
  opt.components = a.components;
  opt.dim = a.dim;
  opt.stay = a.stay;
  opt.speaker_offset_sd = a.speaker_sd;
  opt.speaker_style = a.speaker_style;
  opt.seed = seed;
  synthcorpus::CorpusSpec spec;
  if (a.preset == "separated")
    spec.languages = synthcorpus::separated_languages(opt);
  else if (a.preset == "temporal")
    spec.languages = synthcorpus::temporal_pair(opt);
  else
    throw Error(Errc::invalid_argument, "synth", "unknown preset '" + a.preset + "'");
  spec.speakers_per_language = a.speakers;
  spec.sessions_per_speaker = a.sessions;
  spec.session_duration_s = a.duration;
  spec.first_speaker = a.first_speaker;
  spec.seed = seed;
  return spec;
}

void run_synth(const SynthArgs& a, std::uint64_t seed) {
  const auto spec = corpus_spec(a, seed);
  fs::create_directories(a.out);
  if (a.stream) {
    std::vector<int> ids;
    std::vector<std::pair<features::FeatureMatrix, int>> material;
    for (int l = 0; l < std::min<int>(a.stream_languages, static_cast<int>(spec.languages.size())); ++l)
      ids.push_back(spec.languages[static_cast<std::size_t>(l)].id);
    const auto plan = segmentation::random_plan(ids, a.stream_segments, a.min_segment, a.max_segment, seed);
    for (std::size_t i = 0; i < spec.num_sessions(); ++i) {
      const auto info = synthcorpus::session_info(spec, i);
      if (std::find(ids.begin(), ids.end(), info.language_id) == ids.end()) continue;
      material.emplace_back(synthcorpus::generate_session(spec, i).feats, info.language_id);
    }
    const auto result = with_stage("synth", [&] { return segmentation::concat_streams(material, plan); });
    pipeline::save_features(result.stream, fs::path(a.out) / "stream.feat");
    auto os = open_out(fs::path(a.out) / "truth.txt");
    segmentation::write_truth(os, result.truth);
    std::cout << "wrote " << (fs::path(a.out) / "stream.feat").string() << " (" << result.stream.duration_s()
              << " s, " << result.truth.segments.size() << " segments)\n";
    return;
  }
  std::vector<pipeline::ManifestEntry> entries(spec.num_sessions());
  parallel_for(spec.num_sessions(), [&](std::size_t i) {
    auto utt = synthcorpus::generate_session(spec, i);
    const auto& lang = spec.languages[static_cast<std::size_t>(utt.info.language_index)];
    const std::string file =
        lang.name + "_spk" + std::to_string(utt.info.speaker) + "_ses" + std::to_string(utt.info.session) + ".feat";
    pipeline::save_features(utt.feats, fs::path(a.out) / file);
    entries[i] = {lang.name, std::to_string(utt.info.speaker), std::to_string(utt.info.session), file};
  });
  pipeline::write_manifest(fs::path(a.out) / "manifest.txt", entries);
  std::cout << "wrote " << entries.size() << " sessions to " << a.out << "/manifest.txt\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spoken language identification with SVD-embedded GMM statistics"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus (feature containers + manifest)");
  synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();
  synth_cmd->add_option("--preset", synth.preset, "separated | temporal")->capture_default_str();
  synth_cmd->add_option("--languages", synth.languages)->capture_default_str();
  synth_cmd->add_option("--speakers", synth.speakers)->capture_default_str();
  synth_cmd->add_option("--sessions", synth.sessions)->capture_default_str();
  synth_cmd->add_option("--first-speaker", synth.first_speaker, "Speaker index offset (held-out sets)")
      ->capture_default_str();
  synth_cmd->add_option("--duration", synth.duration, "Session length in seconds")->capture_default_str();
  synth_cmd->add_option("--components", synth.components, "Emission components per language")
      ->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim)->capture_default_str();
  synth_cmd->add_option("--stay", synth.stay, "Self-transition probability")->capture_default_str();
  synth_cmd->add_option("--speaker-sd", synth.speaker_sd, "Speaker offset standard deviation")
      ->capture_default_str();
  synth_cmd->add_option("--speaker-style", synth.speaker_style, "Weight of per-speaker transition habits in [0, 1]")
      ->capture_default_str();
  synth_cmd->add_flag("--stream", synth.stream, "Write a concatenated multi-language stream and its truth");
  synth_cmd->add_option("--stream-languages", synth.stream_languages)->capture_default_str();
  synth_cmd->add_option("--segments-per-language", synth.stream_segments)->capture_default_str();
  synth_cmd->add_option("--min-segment", synth.min_segment)->capture_default_str();
  synth_cmd->add_option("--max-segment", synth.max_segment)->capture_default_str();

  pipeline::PipelineConfig cfg;
  std::string manifest, config_file, model_out = "model.lidsvd";
  auto* train_cmd = app.add_subcommand("train", "Train a language identification system");
  train_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();
  train_cmd->add_option("--config", config_file, "key=value configuration file");
  train_cmd->add_option("--out", model_out, "Model container to write")->capture_default_str();
  auto* o_scheme = train_cmd->add_option("--scheme", cfg.scheme, "1: skipgram, 2: supervector");
  auto* o_mix = train_cmd->add_option("--mixtures", cfg.mixtures, "UBM components");
  auto* o_skip = train_cmd->add_option("--skip", cfg.skip_k, "Skipgram shift K");
  auto* o_tau = train_cmd->add_option("--energy", cfg.energy_tau, "Retained SVD energy fraction");
  auto* o_c = train_cmd->add_option("--c", cfg.svm_c, "SVM cost");
  auto* o_iters = train_cmd->add_option("--em-iters", cfg.em_iters);
  auto* o_clip = train_cmd->add_option("--clip", cfg.adapt_clip_s, "Adaptation clip length in seconds");
  auto* o_cmn = train_cmd->add_option("--cmn", cfg.cmn_window_s, "CMN window in seconds (0 disables)");

  std::string model_path, input_path;
  double duration = 0.0;
  auto* identify_cmd = app.add_subcommand("identify", "Identify the language of one utterance");
  identify_cmd->add_option("--model", model_path)->required();
  identify_cmd->add_option("--input", input_path, ".wav or feature container")->required();
  identify_cmd->add_option("--duration", duration, "Use only the first N seconds");

  segmentation::SegmentationConfig seg;
  std::string trace_out, truth_path;
  auto* segment_cmd = app.add_subcommand("segment", "Sliding-window language segmentation");
  segment_cmd->add_option("--model", model_path)->required();
  segment_cmd->add_option("--input", input_path, "Stream (.wav or feature container)")->required();
  segment_cmd->add_option("--window", seg.window_s, "Window length in seconds")->capture_default_str();
  segment_cmd->add_option("--shift", seg.shift_s, "Window shift in seconds")->capture_default_str();
  segment_cmd->add_option("--out", trace_out, "Trace CSV (default stdout)");
  segment_cmd->add_option("--truth", truth_path, "Ground truth; prints the accuracy to stderr");

  std::vector<std::string> traces;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy tables as CSV");
  eval_cmd->add_option("--truth", truth_path, "Ground truth of a segmented stream");
  eval_cmd->add_option("--trace", traces, "Segmentation traces, one per window length");
  eval_cmd->add_option("--model", model_path, "Model for identification accuracy");
  eval_cmd->add_option("--manifest", manifest, "Test corpus for identification accuracy");
  eval_cmd->add_option("--duration", duration, "Test utterance length in seconds");
  eval_cmd->add_option("--out", eval_out, "CSV file (default stdout)");

  std::string csv_out;
  auto* export_cmd = app.add_subcommand("export-embedding", "Training embedding coordinates as CSV");
  export_cmd->add_option("--model", model_path)->required();
  export_cmd->add_option("--out", csv_out, "CSV file (default stdout)");

  auto* energy_cmd = app.add_subcommand("energy-curve", "Cumulative singular-value energy as CSV");
  energy_cmd->add_option("--model", model_path)->required();
  energy_cmd->add_option("--out", csv_out, "CSV file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      run_synth(synth, seed);
    } else if (*train_cmd) {
      if (!config_file.empty()) {
        // Flags given on the command line win over the file.
        const pipeline::PipelineConfig flags = cfg;
        cfg = with_stage("config", [&] { return pipeline::load_config(config_file, cfg); });
        if (*o_scheme) cfg.scheme = flags.scheme;
        if (*o_mix) cfg.mixtures = flags.mixtures;
        if (*o_skip) cfg.skip_k = flags.skip_k;
        if (*o_tau) cfg.energy_tau = flags.energy_tau;
        if (*o_c) cfg.svm_c = flags.svm_c;
        if (*o_iters) cfg.em_iters = flags.em_iters;
        if (*o_clip) cfg.adapt_clip_s = flags.adapt_clip_s;
        if (*o_cmn) cfg.cmn_window_s = flags.cmn_window_s;
      }
      if (app.get_option("--seed")->count() > 0 || config_file.empty()) cfg.seed = seed;
      const pipeline::ManifestSource source =
          with_stage("corpus", [&] { return pipeline::ManifestSource(manifest, cfg); });
      pipeline::TrainReport report;
      const auto sys = pipeline::train(source, cfg, nullptr, &report);
      pipeline::save(sys, model_out);
      std::cout << "scheme " << sys.scheme << ": " << report.feature_rows << "x" << report.feature_cols
                << " feature matrix, " << report.spectrum_size << " singular values, L = " << report.retained
                << ", training accuracy " << report.training_accuracy << "\nwrote " << model_out << '\n';
    } else if (*identify_cmd) {
      const auto sys = load_model(model_path);
      const auto result = pipeline::identify(sys, load_input(input_path, &sys), duration);
      std::cout << "language," << result.prediction.class_name << '\n' << std::setprecision(10);
      for (Eigen::Index c = 0; c < result.prediction.scores.size(); ++c)
        std::cout << "score_" << sys.svm.class_names[static_cast<std::size_t>(c)] << ','
                  << result.prediction.scores[c] << '\n';
    } else if (*segment_cmd) {
      const auto sys = load_model(model_path);
      const auto stream = load_input(input_path, &sys);
      const auto trace = segmentation::segment(stream, sys, seg);
      emit(trace_out, [&](std::ostream& os) { segmentation::write_trace_csv(os, trace, sys.svm.class_names); });
      if (!truth_path.empty())
        std::cerr << "accuracy " << segmentation::frame_accuracy(trace, segmentation::read_truth(truth_path))
                  << '\n';
    } else if (*eval_cmd) {
      if (!traces.empty()) {
        if (truth_path.empty()) throw Error(Errc::invalid_argument, "eval", "--trace needs --truth");
        const auto truth = segmentation::read_truth(truth_path);
        emit(eval_out, [&](std::ostream& os) {
          os << "swd_s,accuracy_percent\n" << std::fixed << std::setprecision(2);
          for (const auto& t : traces) {
            std::ifstream is(t);
            if (!is) throw Error(Errc::file_not_found, "eval", "trace not found: " + t);
            const auto trace = segmentation::read_trace_csv(is);
            os << trace.window_s << ',' << 100.0 * segmentation::frame_accuracy(trace, truth) << '\n';
          }
        });
      } else if (!model_path.empty() && !manifest.empty()) {
        const auto sys = load_model(model_path);
        pipeline::PipelineConfig fe;
        fe.mfcc = sys.mfcc;
        fe.vad = sys.vad;
        fe.vad_enabled = sys.vad_enabled;
        const pipeline::ManifestSource source(manifest, fe);
        const auto names = source.language_names();
        std::vector<int> predicted(source.size());
        parallel_for(source.size(), [&](std::size_t i) {
          predicted[i] = pipeline::identify(sys, source.load(i), duration).prediction.class_id;
        });
        // Manifest ids are positions in its sorted name list; compare by name.
        std::map<std::string, std::pair<int, int>> per_lang;
        int hits = 0;
        for (std::size_t i = 0; i < source.size(); ++i) {
          const std::string& truth = names.at(source.label(i));
          const auto& ids = sys.svm.class_ids;
          const auto at = std::find(ids.begin(), ids.end(), predicted[i]) - ids.begin();
          const bool ok = sys.svm.class_names[static_cast<std::size_t>(at)] == truth;
          per_lang[truth].first += ok;
          per_lang[truth].second += 1;
          hits += ok;
        }
        emit(eval_out, [&](std::ostream& os) {
          os << "language,accuracy_percent,utterances\n" << std::fixed << std::setprecision(2);
          for (const auto& [name, c] : per_lang) os << name << ',' << 100.0 * c.first / c.second << ',' << c.second << '\n';
          os << "overall," << 100.0 * hits / static_cast<double>(source.size()) << ',' << source.size() << '\n';
        });
      } else {
        throw Error(Errc::invalid_argument, "eval", "give --truth with --trace, or --model with --manifest");
      }
    } else if (*export_cmd) {
      const auto sys = load_model(model_path);
      emit(csv_out, [&](std::ostream& os) {
        const auto& e = sys.train_embedding;
        os << "label";
        for (Eigen::Index j = 0; j < e.rows.cols(); ++j) os << ",e" << j + 1;
        os << '\n' << std::setprecision(10);
        for (Eigen::Index r = 0; r < e.rows.rows(); ++r) {
          os << e.labels[static_cast<std::size_t>(r)];
          for (Eigen::Index j = 0; j < e.rows.cols(); ++j) os << ',' << e.rows(r, j);
          os << '\n';
        }
      });
    } else if (*energy_cmd) {
      const auto sys = load_model(model_path);
      emit(csv_out, [&](std::ostream& os) {
        os << "index,singular_value,energy\n" << std::setprecision(10);
        const auto curve = embedding::energy_curve(sys.embedding.spectrum);
        for (const auto& [i, f] : curve) os << i << ',' << sys.embedding.spectrum[i - 1] << ',' << f << '\n';
      });
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
