// hkin: detect articulation changepoints, build hybrid automata, simulate them, and generate
// synthetic demonstrations.
//
// Exit codes: 0 ok, 2 input error, 3 inference failure, 4 validation failure.

#include "hkin/hkin.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hkin::InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw hkin::InputError("cannot write '" + path + "'");
  out << content;
  if (!out.flush()) throw hkin::InputError("failed writing '" + path + "'");
}

struct ConfigOptions {
  std::string file;
  std::vector<std::string> sets;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", file, "key=value configuration file");
    app->add_option("--set", sets, "override one configuration key (key=value), repeatable");
  }

  // File entries first, then --set, then the dedicated flags collected in `extra`.
  hkin::RunConfig load(const hkin::ConfigEntries& extra) const {
    hkin::ConfigEntries entries;
    if (!file.empty()) {
      std::istringstream in(read_file(file));
      entries = hkin::parse_config(in);
    }
    for (const auto& s : sets) {
      std::istringstream in(s);
      for (auto& e : hkin::parse_config(in)) entries.push_back(std::move(e));
    }
    entries.insert(entries.end(), extra.begin(), extra.end());
    hkin::RunConfig c = hkin::make_config(entries);
    c.validate();
    return c;
  }
};

void flag_entry(hkin::ConfigEntries& out, const char* key, const std::string& value) {
  if (!value.empty()) out.emplace_back(key, value);
}

hkin::Trajectory load_trajectory(const std::string& path) {
  std::istringstream in(read_file(path));
  try {
    return hkin::read_trajectory(in);
  } catch (const hkin::InputError& e) {
    throw hkin::InputError(path + ": " + e.what());
  }
}

hkin::Json load_json(const std::string& path) { return hkin::detail::parse_json(read_file(path)); }

std::pair<int, int> parse_edge(const std::string& s) {
  const auto dash = s.find('-');
  try {
    if (dash == std::string::npos) throw std::invalid_argument(s);
    std::size_t a = 0, b = 0;
    const int i = std::stoi(s.substr(0, dash), &a);
    const int j = std::stoi(s.substr(dash + 1), &b);
    if (a != dash || b != s.size() - dash - 1) throw std::invalid_argument(s);
    return {i, j};
  } catch (const std::logic_error&) {
    throw hkin::InputError("edge '" + s + "' must look like i-j");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid kinematic model inference for articulated objects"};
  app.require_subcommand(1);

  // detect
  auto* detect = app.add_subcommand("detect", "segment a trajectory CSV into articulation models");
  ConfigOptions detect_cfg;
  detect_cfg.add_to(detect);
  std::string detect_in, detect_out, detect_mode, detect_seed, detect_particles;
  detect->add_option("-i,--input", detect_in, "trajectory CSV")->required();
  detect->add_option("-o,--output", detect_out, "segmentation JSON")->required();
  detect->add_option("--mode", detect_mode, "action-conditional or observation-only");
  detect->add_option("--seed", detect_seed, "random seed");
  detect->add_option("--particles", detect_particles, "particle cap");

  // build
  auto* build = app.add_subcommand("build", "compile segmentations into a hybrid automaton");
  ConfigOptions build_cfg;
  build_cfg.add_to(build);
  std::vector<std::string> build_segs, build_trajs, build_edges;
  std::string build_parts, build_out, build_extent;
  build->add_option("-s,--segmentation", build_segs, "segmentation JSON, one per candidate edge")->required();
  build->add_option("-t,--trajectory", build_trajs, "trajectory CSV matching each segmentation")->required();
  build->add_option("-e,--edge", build_edges, "part pair i-j of each segmentation (default 0-1, 0-2, ...)");
  build->add_option("-p,--parts", build_parts, "comma-separated part names");
  build->add_option("--rigid-extent", build_extent, "configurational extent given to rigid models");
  build->add_option("-o,--output", build_out, "automaton JSON")->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run an input sequence through an automaton");
  std::string sim_automaton, sim_inputs, sim_out;
  simulate->add_option("-a,--automaton", sim_automaton, "automaton JSON")->required();
  simulate->add_option("-u,--inputs", sim_inputs, "input CSV with columns t,u0,u1,...")->required();
  simulate->add_option("-o,--output", sim_out, "trace CSV")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic demonstration");
  ConfigOptions synth_cfg;
  synth_cfg.add_to(synth);
  std::string synth_out, synth_labels, synth_object, synth_regime, synth_T, synth_seed;
  synth->add_option("-o,--output", synth_out, "trajectory CSV")->required();
  synth->add_option("-l,--labels", synth_labels, "labels JSON")->required();
  synth->add_option("--object", synth_object, "microwave or drawer");
  synth->add_option("--regime", synth_regime, "with-grasp, no-action-gaps or without-grasp");
  synth->add_option("-T,--steps", synth_T, "number of observations");
  synth->add_option("--seed", synth_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*detect) {
      hkin::ConfigEntries extra;
      flag_entry(extra, "mode", detect_mode);
      flag_entry(extra, "seed", detect_seed);
      flag_entry(extra, "particles", detect_particles);
      const hkin::RunConfig cfg = detect_cfg.load(extra);
      const hkin::Trajectory tr = load_trajectory(detect_in);
      const hkin::Segmentation seg = hkin::detect(tr.y, tr.a, cfg.detect);
      write_file(detect_out, hkin::dump(hkin::to_json(seg)));
    } else if (*build) {
      hkin::ConfigEntries extra;
      flag_entry(extra, "rigid_extent", build_extent);
      const hkin::RunConfig cfg = build_cfg.load(extra);
      if (build_segs.size() != build_trajs.size())
        throw hkin::InputError("each segmentation needs exactly one trajectory");
      if (!build_edges.empty() && build_edges.size() != build_segs.size())
        throw hkin::InputError("each segmentation needs exactly one edge");
      std::vector<std::string> parts;
      if (build_parts.empty()) {
        parts.emplace_back("base");
        for (std::size_t k = 0; k < build_segs.size(); ++k) parts.push_back("part" + std::to_string(k + 1));
      } else {
        std::stringstream ss(build_parts);
        for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
      }
      std::vector<hkin::GraphEdge> candidates;
      for (std::size_t k = 0; k < build_segs.size(); ++k) {
        const auto [i, j] = build_edges.empty() ? std::pair<int, int>{0, static_cast<int>(k + 1)} : parse_edge(build_edges[k]);
        const hkin::Segmentation seg = hkin::segmentation_from_json(load_json(build_segs[k]));
        const hkin::Trajectory tr = load_trajectory(build_trajs[k]);
        candidates.push_back({i, j, hkin::to_configurational(seg, tr.y), seg.log_map_score});
      }
      const hkin::HybridAutomaton h =
          hkin::build_automaton(hkin::build_graph(std::move(parts), std::move(candidates)), cfg.rigid_extent);
      if (const auto v = hkin::validate(h); !v.empty()) throw hkin::ValidationError(v.front());
      write_file(build_out, hkin::dump(hkin::to_json(h)));
    } else if (*simulate) {
      const hkin::HybridAutomaton h = hkin::automaton_from_json(load_json(sim_automaton));
      if (const auto v = hkin::validate(h); !v.empty()) {
        for (const auto& msg : v) std::cerr << "hkin: " << msg << '\n';
        return 4;
      }
      std::istringstream in(read_file(sim_inputs));
      const auto inputs = hkin::read_inputs(in, h.coordinates());
      std::ostringstream trace;
      hkin::write_trace(trace, h, inputs);
      write_file(sim_out, trace.str());
    } else if (*synth) {
      hkin::ConfigEntries extra;
      flag_entry(extra, "object", synth_object);
      flag_entry(extra, "regime", synth_regime);
      flag_entry(extra, "T", synth_T);
      flag_entry(extra, "seed", synth_seed);
      const hkin::RunConfig cfg = synth_cfg.load(extra);
      const hkin::LabeledTrajectory lt = hkin::generate(cfg.scenario);
      std::ostringstream csv;
      hkin::write_trajectory(csv, lt.y, lt.a);
      const std::string labels = hkin::dump(hkin::to_json(cfg.scenario, lt));
      write_file(synth_out, csv.str());
      write_file(synth_labels, labels);
    }
  } catch (const hkin::InputError& e) {
    std::cerr << "hkin: " << e.what() << '\n';
    return 2;
  } catch (const hkin::ValidationError& e) {
    std::cerr << "hkin: " << e.what() << '\n';
    return 4;
  } catch (const hkin::Error& e) {
    std::cerr << "hkin: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
