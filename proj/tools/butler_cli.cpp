// butler: command-line front end for demo generation, learning, playback,
// perception evaluation and scenario runs.
//
// Every subcommand accepts --config <file.json>. Top-level keys in the
// config apply to all subcommands; a section named after the subcommand
// overrides them. Flags given on the command line override both.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "butler/butler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
struct is_optional : std::false_type {};
template <class T>
struct is_optional<std::optional<T>> : std::true_type {};

template <class T>
void assign_from(const json& v, T& var) {
  if constexpr (is_optional<T>::value)
    var = v.get<typename T::value_type>();
  else if constexpr (std::is_same_v<T, fs::path>)
    var = v.get<std::string>();
  else
    var = v.get<T>();
}

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& help) : name_(name) {
    app_ = parent.add_subcommand(name, help);
    app_->add_option("--config", config_path_, "JSON config file")->check(CLI::ExistingFile);
    bind("--seed", seed_, "seed", "RNG seed");
    bind("--out", out_, "out", "output directory")->capture_default_str();
  }

  /// Adds an option whose value falls back to the config key when the flag is absent.
  template <class T>
  CLI::Option* bind(const std::string& flag, T& var, const std::string& key, const std::string& help) {
    auto* opt = app_->add_option(flag, var, help);
    fallbacks_.push_back([opt, &var, key](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) assign_from(cfg.at(key), var);
    });
    return opt;
  }

  CLI::Option* bind_flag(const std::string& flag, bool& var, const std::string& key, const std::string& help) {
    auto* opt = app_->add_flag(flag, var, help);
    fallbacks_.push_back([opt, &var, key](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<bool>();
    });
    return opt;
  }

  void on_run(std::function<int(Command&)> body) { body_ = std::move(body); }
  bool parsed() const { return app_->parsed(); }

  int run() {
    json cfg = json::object();
    if (!config_path_.empty()) {
      std::ifstream is(config_path_);
      if (!is) throw butler::IoError("cannot open config '" + config_path_ + "'");
      json doc;
      try {
        is >> doc;
      } catch (const json::exception& e) {
        throw butler::FormatError("config '" + config_path_ + "' is not valid JSON: " + e.what());
      }
      if (!doc.is_object()) throw butler::FormatError("config must be a JSON object");
      for (const auto& [k, v] : doc.items())
        if (!v.is_object()) cfg[k] = v;
      if (doc.contains(name_) && doc.at(name_).is_object())
        for (const auto& [k, v] : doc.at(name_).items()) cfg[k] = v;
    }
    try {
      for (const auto& f : fallbacks_) f(cfg);
    } catch (const json::exception& e) {
      throw butler::FormatError("bad config value: " + std::string(e.what()));
    }
    return body_(*this);
  }

  std::uint64_t seed() const {
    if (!seed_) throw butler::InvalidArgument("'" + name_ + "' needs a seed (--seed or config key \"seed\")");
    return *seed_;
  }
  const fs::path& out() const { return out_; }
  fs::path out_dir() const {
    fs::create_directories(out_);
    return out_;
  }

 private:
  std::string name_;
  CLI::App* app_ = nullptr;
  std::string config_path_;
  std::optional<std::uint64_t> seed_;
  fs::path out_ = "out";
  std::vector<std::function<void(const json&)>> fallbacks_;
  std::function<int(Command&)> body_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw butler::IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw butler::IoError("failed writing '" + path.string() + "'");
}

std::string csv_header(Eigen::Index joints, const std::string& lead) {
  std::string h = lead;
  for (Eigen::Index j = 0; j < joints; ++j) h += ",q" + std::to_string(j);
  return h;
}

// ---------------------------------------------------------------------------
// gen-demos

void add_gen_demos(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto& c = *cmds.emplace_back(std::make_unique<Command>(root, "gen-demos", "write synthetic demonstrations"));
  struct Params {
    butler::DemoGenConfig gen;
    std::string waveform = "sinusoid";
  };
  auto p = std::make_shared<Params>();
  c.bind("--label", p->gen.label, "label", "movement label");
  c.bind("--waveform", p->waveform, "waveform", "sinusoid or min_jerk");
  c.bind("--joints", p->gen.joints, "joints", "joint count");
  c.bind("--count", p->gen.count, "count", "number of demonstrations");
  c.bind("--samples", p->gen.samples, "samples", "samples over the motion");
  c.bind("--duration", p->gen.duration, "duration", "motion duration in seconds");
  c.bind("--amplitude", p->gen.amplitude, "amplitude", "amplitude in radians");
  c.bind("--noise", p->gen.noise, "noise", "joint noise std in radians");
  c.bind("--idle-pad", p->gen.idle_pad, "idle_pad", "idle seconds before and after");
  c.bind("--jitter", p->gen.time_jitter, "jitter", "relative duration spread");
  c.on_run([p](Command& cmd) {
    p->gen.waveform = butler::waveform_from_string(p->waveform);
    const auto demos = butler::generate_demos(p->gen, cmd.seed());
    butler::write_demo_directory(cmd.out_dir(), demos);
    std::cout << "wrote " << demos.size() << " demonstrations of '" << p->gen.label << "' to " << cmd.out().string()
              << "\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// learn

void add_learn(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto& c = *cmds.emplace_back(std::make_unique<Command>(root, "learn", "learn a movement from a demo directory"));
  struct Params {
    std::string demos;
    std::string name;
    butler::LearnConfig learn;
    bool no_trim = false;
    std::optional<double> rate;
  };
  auto p = std::make_shared<Params>();
  c.bind("--demos", p->demos, "demos", "directory of <label>__<n>.csv files");
  c.bind("--name", p->name, "name", "movement name (default: the demo label)");
  c.bind("--k-min", p->learn.select.k_min, "k_min", "smallest K tried");
  c.bind("--k-max", p->learn.select.k_max, "k_max", "largest K tried");
  c.bind("--restarts", p->learn.select.restarts, "restarts", "k-means++ restarts per K");
  c.bind("--velocity-threshold", p->learn.trim.velocity_threshold, "velocity_threshold", "idle speed in rad/s");
  c.bind("--rate", p->rate, "rate", "default playback rate in Hz");
  c.bind_flag("--no-trim", p->no_trim, "no_trim", "keep idle head and tail");
  c.on_run([p](Command& cmd) {
    if (p->demos.empty()) throw butler::InvalidArgument("--demos is required");
    const auto demos = butler::read_demo_directory(p->demos);
    if (demos.empty()) throw butler::InvalidArgument("no demonstrations found in '" + p->demos + "'");
    p->learn.seed = cmd.seed();
    p->learn.trim_idle = !p->no_trim;
    p->learn.default_rate = p->rate;
    const std::string name = p->name.empty() ? demos.front().label() : p->name;
    const auto outcome = butler::learn_movement_detailed(demos, name, p->learn);

    const auto dir = cmd.out_dir();
    butler::save_movement(outcome.movement, dir / (name + ".json"));
    std::string table = "k,bic,log_likelihood,parameters,ok,selected\n";
    for (const auto& e : outcome.selection.table) {
      table += std::to_string(e.k) + "," + (e.ok ? butler::format_double(e.bic) : "") + "," +
               (e.ok ? butler::format_double(e.log_likelihood) : "") + "," + std::to_string(e.parameters) + "," +
               (e.ok ? "1" : "0") + "," + (e.k == outcome.selection.selected_k ? "1" : "0") + "\n";
    }
    write_text(dir / (name + "_bic.csv"), table);
    std::cout << "learned '" << name << "' from " << demos.size() << " demonstrations: K=" << outcome.selection.selected_k
              << ", duration " << outcome.movement.duration << " s\n";
    for (const auto& e : outcome.selection.table)
      std::cout << "  K=" << e.k << (e.ok ? "  BIC " + butler::format_double(e.bic) : "  failed: " + e.error) << "\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// play

void write_plot_data(const butler::LearnedMovement& m, const std::vector<butler::Demonstration>& demos,
                     const fs::path& dir) {
  const auto joints = m.dim;
  std::string text = csv_header(joints, "demo,t") + "\n";
  for (std::size_t i = 0; i < demos.size(); ++i) {
    if (demos[i].dim() != joints) throw butler::MixedDimensions("plot demos differ in joint count from the movement");
    for (const auto& s : demos[i].samples()) {
      text += std::to_string(i) + "," + butler::format_double(s.t);
      for (Eigen::Index j = 0; j < joints; ++j) text += "," + butler::format_double(s.q[j]);
      text += "\n";
    }
  }
  write_text(dir / (m.name + "_plot_demos.csv"), text);

  const butler::GmrRegressor gmr(m.model);
  text = csv_header(joints, "t");
  for (Eigen::Index j = 0; j < joints; ++j) text += ",sd" + std::to_string(j);
  text += "\n";
  const auto n = butler::playback_sample_count(m.duration, m.default_rate);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = m.duration * static_cast<double>(i) / static_cast<double>(n - 1);
    const auto r = gmr.regress(t);
    text += butler::format_double(t);
    for (Eigen::Index j = 0; j < joints; ++j) text += "," + butler::format_double(r.mean[j]);
    for (Eigen::Index j = 0; j < joints; ++j) text += "," + butler::format_double(std::sqrt(r.covariance(j, j)));
    text += "\n";
  }
  write_text(dir / (m.name + "_plot_curve.csv"), text);

  text = "component,prior,mu_t";
  for (Eigen::Index j = 0; j < joints; ++j) text += ",mu_q" + std::to_string(j);
  text += ",sd_t";
  for (Eigen::Index j = 0; j < joints; ++j) text += ",sd_q" + std::to_string(j);
  text += "\n";
  for (Eigen::Index k = 0; k < m.model.k(); ++k) {
    const auto& mu = m.model.means[static_cast<std::size_t>(k)];
    const auto& cov = m.model.covariances[static_cast<std::size_t>(k)];
    text += std::to_string(k) + "," + butler::format_double(m.model.priors[k]);
    for (Eigen::Index j = 0; j <= joints; ++j) text += "," + butler::format_double(mu[j]);
    for (Eigen::Index j = 0; j <= joints; ++j) text += "," + butler::format_double(std::sqrt(cov(j, j)));
    text += "\n";
  }
  write_text(dir / (m.name + "_plot_gaussians.csv"), text);
}

void add_play(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto& c = *cmds.emplace_back(std::make_unique<Command>(root, "play", "generate a trajectory from a movement file"));
  struct Params {
    std::string movement;
    double speed = 1.0;
    std::optional<double> rate;
    std::string plot_demos;
  };
  auto p = std::make_shared<Params>();
  c.bind("--movement", p->movement, "movement", "movement JSON file");
  c.bind("--speed", p->speed, "speed", "speed factor (2 plays twice as fast)");
  c.bind("--rate", p->rate, "rate", "samples per second of model time (default: the movement's rate)");
  c.bind("--plot-demos", p->plot_demos, "plot_demos", "demo directory to export alongside the learned curve");
  c.on_run([p](Command& cmd) {
    if (p->movement.empty()) throw butler::InvalidArgument("--movement is required");
    const auto m = butler::load_movement(p->movement);
    const double rate = p->rate.value_or(m.default_rate);
    const auto traj = butler::generate_trajectory(m, p->speed, rate);
    const auto dir = cmd.out_dir();
    butler::write_demo_csv(dir / (m.name + "_trajectory.csv"), traj);
    const json summary{{"movement", m.name},   {"speed", p->speed}, {"rate_hz", rate},
                       {"samples", traj.size()}, {"duration_s", traj.duration()}};
    write_text(dir / (m.name + "_play.json"), summary.dump(2) + "\n");
    if (!p->plot_demos.empty()) write_plot_data(m, butler::read_demo_directory(p->plot_demos), dir);
    std::cout << "played '" << m.name << "': " << traj.size() << " samples over " << traj.duration() << " s\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// perceive

std::vector<fs::path> frame_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw butler::IoError("no such frame file or directory '" + in + "'");
    }
  }
  return out;
}

json frame_report(const butler::PerceptionFrame& frame, const butler::PerceptionOptions& opts, double& worst_error) {
  const auto rep = butler::analyze_frame(frame, opts);
  const bool has_truth = !frame.ground_truth.empty() && frame.ground_truth.size() == frame.detections.size();
  json objects = json::array();
  double frame_worst = 0.0;
  for (const auto& o : rep.localization.objects) {
    json obj{{"detection", o.detection_index}, {"label", o.label}, {"x", o.x}, {"y", o.y}, {"distance", o.distance}};
    if (has_truth) {
      const auto& g = frame.ground_truth[o.detection_index];
      const double err = std::hypot(o.x - g.x, o.y - g.y);
      obj["position_error"] = err;
      frame_worst = std::max(frame_worst, err);
    }
    objects.push_back(std::move(obj));
  }
  json chairs = json::array();
  for (const auto& c : rep.chairs) {
    json ch{{"detection", c.detection_index}, {"status", butler::to_string(c.occupancy.status)},
            {"overlap", c.occupancy.overlap}};
    if (c.location) ch["location"] = {{"x", c.location->x}, {"y", c.location->y}};
    chairs.push_back(std::move(ch));
  }
  json persons = json::array();
  for (const auto& w : rep.waving) persons.push_back({{"left", w.left}, {"right", w.right}, {"waving", w.any()}});
  json out{{"objects", std::move(objects)},
           {"skipped_no_depth", rep.localization.skipped_no_depth},
           {"chairs", std::move(chairs)},
           {"persons", std::move(persons)},
           {"waving", rep.any_waving}};
  if (has_truth) {
    out["max_position_error"] = frame_worst;
    worst_error = std::max(worst_error, frame_worst);
  }
  return out;
}

void add_perceive(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto& c = *cmds.emplace_back(std::make_unique<Command>(root, "perceive", "localize objects, chairs and waving"));
  struct Params {
    std::vector<std::string> frames;
    int synthetic = 0;
    bool noise = false;
    butler::PerceptionOptions opts;
  };
  auto p = std::make_shared<Params>();
  c.bind("--frames", p->frames, "frames", "frame files or directories");
  c.bind("--synthetic", p->synthetic, "synthetic", "also evaluate N generated scenes");
  c.bind("--overlap-threshold", p->opts.overlap_threshold, "overlap_threshold", "chair overlap for 'taken'");
  c.bind("--min-keypoint-confidence", p->opts.min_keypoint_confidence, "min_keypoint_confidence",
         "keypoint confidence floor");
  c.bind_flag("--noise", p->noise, "noise", "add range-dependent depth noise");
  c.on_run([p](Command& cmd) {
    if (p->frames.empty() && p->synthetic <= 0) throw butler::InvalidArgument("give --frames and/or --synthetic N");
    const bool seeded = p->noise || p->synthetic > 0;
    const std::uint64_t seed = seeded ? cmd.seed() : 0;
    std::vector<std::pair<std::string, butler::PerceptionFrame>> frames;
    for (const auto& f : frame_files(p->frames)) frames.emplace_back(f.string(), butler::load_frame(f));
    for (int i = 0; i < p->synthetic; ++i)
      frames.emplace_back("synthetic:" + std::to_string(i),
                          butler::generate_scene(butler::derive_seed(seed, 0x5ce, static_cast<std::uint64_t>(i))));

    json reports = json::array();
    double worst = 0.0;
    std::size_t waving = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      auto& [source, frame] = frames[i];
      if (p->noise) frame.depth = butler::apply_depth_noise(frame.depth, butler::derive_seed(seed, 0xd3, i));
      auto r = frame_report(frame, p->opts, worst);
      r["source"] = source;
      waving += r["waving"].get<bool>() ? 1 : 0;
      reports.push_back(std::move(r));
    }
    const json doc{{"frames", std::move(reports)}, {"max_position_error", worst}, {"frames_with_waving", waving}};
    const auto path = cmd.out_dir() / "perception_report.json";
    write_text(path, doc.dump(2) + "\n");
    std::cout << "perceived " << frames.size() << " frames, max position error " << worst << " m, " << waving
              << " with waving; report in " << path.string() << "\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// scenario

void add_scenario(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto& c = *cmds.emplace_back(std::make_unique<Command>(root, "scenario", "run a scenario script"));
  struct Params {
    std::string script;
    std::string export_path;
  };
  auto p = std::make_shared<Params>();
  c.bind("--script", p->script, "script", "scenario JSON (default: the built-in butler scenario)");
  c.bind("--export", p->export_path, "export", "write the script with inline stubs to this file and stop");
  c.on_run([p](Command& cmd) {
    const auto loaded = p->script.empty() ? butler::make_butler_scenario() : butler::load_scenario(p->script);
    if (!p->export_path.empty()) {
      const fs::path path(p->export_path);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_text(path, butler::scenario_to_json(loaded.script, loaded.stubs).dump(1) + "\n");
      std::cout << "exported '" << loaded.script.name << "' to " << path.string() << "\n";
      return 0;
    }
    butler::validate_scenario(loaded.script, loaded.stubs);
    const auto outcome = butler::run_scenario_detailed(loaded.script, loaded.stubs, cmd.seed());
    const auto dir = cmd.out_dir();
    write_text(dir / "events.jsonl", outcome.log.to_jsonl());
    write_text(dir / "blackboard.json", outcome.blackboard.dump(2) + "\n");
    for (const auto& e : outcome.log.events()) {
      if (e.kind == butler::EventKind::stage_entered)
        std::cout << "[" << e.tick << " ms] stage " << e.payload.at("stage").get<std::string>() << "\n";
      else if (e.kind == butler::EventKind::error)
        std::cerr << "[" << e.tick << " ms] error " << e.payload.dump() << "\n";
    }
    const auto errors = outcome.log.count(butler::EventKind::error);
    std::cout << (outcome.completed && errors == 0 ? "completed" : "halted") << " with " << errors
              << " error events; log in " << (dir / "events.jsonl").string() << "\n";
    return outcome.completed && errors == 0 ? 0 : 1;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"butler: learning from demonstration, perception and task management toolkit"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> cmds;
  add_gen_demos(app, cmds);
  add_learn(app, cmds);
  add_play(app, cmds);
  add_perceive(app, cmds);
  add_scenario(app, cmds);
  CLI11_PARSE(app, argc, argv);
  try {
    for (auto& c : cmds)
      if (c->parsed()) return c->run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
