#pragma once

// File-format layer: CSV/JSON/binary trace exports, trigger and model
// serialization, dataset manifests and the per-run artifact index.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "audiotaint/anomaly.hpp"
#include "audiotaint/audio.hpp"
#include "audiotaint/dataset.hpp"
#include "audiotaint/finance.hpp"
#include "audiotaint/fluid.hpp"
#include "audiotaint/lyapunov.hpp"
#include "audiotaint/trigger.hpp"
#include "audiotaint/victim.hpp"

namespace taint::io {

using nlohmann::json;

// Shortest exact decimal representation of a double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

inline void write_path_csv(const finance::PricePath& p, const std::string& path) {
  auto out = open_out(path);
  out << "t,value\n";
  for (std::size_t i = 0; i < p.times.size(); ++i)
    out << fmt(p.times[i]) << ',' << fmt(p.values[i]) << '\n';
}

inline void write_execution_csv(const finance::ExecutionTrace& tr, const std::string& path) {
  auto out = open_out(path);
  out << "t,value,q_mkt,q_lim,q_total\n";
  for (std::size_t i = 0; i < tr.price.times.size(); ++i)
    out << fmt(tr.price.times[i]) << ',' << fmt(tr.price.values[i]) << ',' << fmt(tr.q_mkt[i])
        << ',' << fmt(tr.q_lim[i]) << ',' << fmt(tr.q_total[i]) << '\n';
}

inline void write_series_csv(const std::vector<double>& values, const std::string& header,
                             const std::string& path) {
  auto out = open_out(path);
  out << header << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << fmt(values[i]) << '\n';
}

inline void write_field_csv(const fluid::VelocityField& f, const std::string& path) {
  auto out = open_out(path);
  out << "i,j,k,u,v,w\n";
  for (int i = 0; i < f.u.nx(); ++i)
    for (int j = 0; j < f.u.ny(); ++j)
      for (int k = 0; k < f.u.nz(); ++k)
        out << i << ',' << j << ',' << k << ',' << fmt(f.u.at(i, j, k)) << ','
            << fmt(f.v.at(i, j, k)) << ',' << fmt(f.w.at(i, j, k)) << '\n';
}

// Compact dump: nx, ny, nz as little-endian int32, then u, v, w as
// little-endian float64 in row-major (i, j, k) order.
inline void write_field_binary(const fluid::VelocityField& f, const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::int32_t dims[3] = {f.u.nx(), f.u.ny(), f.u.nz()};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  for (const fluid::Grid3* g : {&f.u, &f.v, &f.w})
    out.write(reinterpret_cast<const char*>(g->data().data()),
              static_cast<std::streamsize>(g->data().size() * sizeof(double)));
}

inline fluid::VelocityField read_field_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::int32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  fluid::VelocityField f;
  for (fluid::Grid3* g : {&f.u, &f.v, &f.w}) {
    *g = fluid::Grid3(dims[0], dims[1], dims[2]);
    in.read(reinterpret_cast<char*>(g->data().data()),
            static_cast<std::streamsize>(g->data().size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("truncated field dump: " + path);
  return f;
}

inline void write_detection_csv(const lyapunov::DetectionReport& rep, const std::string& path) {
  auto out = open_out(path);
  out << "index,V,flag\n";
  for (std::size_t i = 0; i < rep.v_values.size(); ++i)
    out << i << ',' << fmt(rep.v_values[i]) << ',' << (rep.flags[i] ? 1 : 0) << '\n';
}

inline json detection_report_json(const lyapunov::DetectionReport& rep) {
  json j;
  j["mean_v"] = rep.mean_v;
  j["std_v"] = rep.std_v;
  j["ci_low"] = rep.ci_low;
  j["ci_high"] = rep.ci_high;
  j["boot_ci_low"] = rep.boot_ci_low;
  j["boot_ci_high"] = rep.boot_ci_high;
  j["n_values"] = rep.v_values.size();
  int n_flags = 0;
  for (bool f : rep.flags) n_flags += f ? 1 : 0;
  j["n_flags"] = n_flags;
  j["v_values"] = rep.v_values;
  std::vector<int> flags;
  flags.reserve(rep.flags.size());
  for (bool f : rep.flags) flags.push_back(f ? 1 : 0);
  j["flags"] = flags;
  return j;
}

inline void write_bifurcation_csv(
    const std::vector<std::pair<double, std::vector<double>>>& scan, const std::string& path) {
  auto out = open_out(path);
  out << "param,tail_index,V\n";
  for (const auto& [param, tail] : scan)
    for (std::size_t i = 0; i < tail.size(); ++i)
      out << fmt(param) << ',' << i << ',' << fmt(tail[i]) << '\n';
}

inline void write_ablation_csv(const std::vector<double>& recon_losses,
                               const Eigen::VectorXd& lof, const std::vector<bool>& flags,
                               const std::string& path) {
  auto out = open_out(path);
  out << "index,recon_loss,lof,flag\n";
  for (std::size_t i = 0; i < recon_losses.size(); ++i)
    out << i << ',' << fmt(recon_losses[i]) << ','
        << fmt(i < static_cast<std::size_t>(lof.size()) ? lof(i) : 0.0) << ','
        << (flags[i] ? 1 : 0) << '\n';
}

inline void write_pca_csv(const Eigen::MatrixXd& coords, const std::vector<bool>& flags,
                          const std::string& path) {
  auto out = open_out(path);
  out << "index";
  for (Eigen::Index c = 0; c < coords.cols(); ++c) out << ",pc" << c;
  out << ",flag\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    out << i;
    for (Eigen::Index c = 0; c < coords.cols(); ++c) out << ',' << fmt(coords(i, c));
    out << ',' << (flags[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
  }
}

// Single-column or multi-column numeric CSV; returns the last column. Raises
// with a 1-based line number on malformed rows; a leading header is allowed.
inline std::vector<double> read_value_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t cut = line.find_last_of(',');
    const std::string cell = cut == std::string::npos ? line : line.substr(cut + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument("trailing characters");
      values.push_back(v);
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header row
      throw std::runtime_error("malformed CSV at line " + std::to_string(line_no) + " in " +
                               path);
    }
  }
  return values;
}

// ---------------------------------------------------------------------------
// Trigger, model and trajectory serialization
// ---------------------------------------------------------------------------

inline json trigger_to_json(const trigger::Trigger& t) {
  json j;
  j["sampling_rate"] = t.sampling_rate;
  j["imperceptibility"] = t.imperceptibility;
  j["positions"] = t.positions;
  j["waveform"] = t.waveform;
  return j;
}

inline trigger::Trigger trigger_from_json(const json& j) {
  trigger::Trigger t;
  t.sampling_rate = j.at("sampling_rate").get<int>();
  t.imperceptibility = j.at("imperceptibility").get<double>();
  t.positions = j.at("positions").get<std::vector<int>>();
  t.waveform = j.at("waveform").get<std::vector<double>>();
  return t;
}

inline void write_trigger_wav(const trigger::Trigger& t, const std::string& path) {
  audio::AudioSample s;
  s.sampling_rate = t.sampling_rate;
  s.waveform = t.waveform;
  ensure_parent(path);
  audio::write_wav(s, path);
}

inline json model_to_json(const victim::MlpModel& m) {
  json j;
  j["dims"] = m.dims;
  json layers = json::array();
  for (int l = 0; l < m.n_layers(); ++l) {
    json layer;
    std::vector<double> w(m.weights[l].data(), m.weights[l].data() + m.weights[l].size());
    std::vector<double> b(m.biases[l].data(), m.biases[l].data() + m.biases[l].size());
    layer["weights"] = w;  // column-major
    layer["biases"] = b;
    layers.push_back(layer);
  }
  j["layers"] = layers;
  return j;
}

inline victim::MlpModel model_from_json(const json& j) {
  victim::MlpModel m;
  m.dims = j.at("dims").get<std::vector<int>>();
  const auto& layers = j.at("layers");
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const auto w = layers.at(l).at("weights").get<std::vector<double>>();
    const auto b = layers.at(l).at("biases").get<std::vector<double>>();
    Eigen::MatrixXd wm(m.dims[l + 1], m.dims[l]);
    if (static_cast<Eigen::Index>(w.size()) != wm.size())
      throw std::runtime_error("model_from_json: weight size mismatch");
    std::copy(w.begin(), w.end(), wm.data());
    m.weights.push_back(std::move(wm));
    Eigen::VectorXd bv(m.dims[l + 1]);
    std::copy(b.begin(), b.end(), bv.data());
    m.biases.push_back(std::move(bv));
  }
  return m;
}

inline void write_trajectory_csv(const victim::WeightTrajectory& traj, const std::string& path) {
  auto out = open_out(path);
  out << "step";
  if (!traj.snapshots.empty())
    for (Eigen::Index i = 0; i < traj.snapshots.front().size(); ++i) out << ",w" << i;
  out << '\n';
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    out << traj.step_indices[s];
    for (Eigen::Index i = 0; i < traj.snapshots[s].size(); ++i)
      out << ',' << fmt(traj.snapshots[s](i));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dataset manifests: JSON lines, one {"path": ..., "label": ...} per sample
// ---------------------------------------------------------------------------

inline void write_dataset(const dataset::Dataset& d, const std::string& dir,
                          const std::string& manifest_path) {
  std::filesystem::create_directories(dir);
  auto out = open_out(manifest_path);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "sample_%05zu.wav", i);
    const std::string wav_path = (std::filesystem::path(dir) / name).string();
    audio::write_wav(d.samples[i], wav_path);
    json rec;
    rec["path"] = wav_path;
    rec["label"] = d.samples[i].label;
    out << rec.dump() << '\n';
  }
}

inline dataset::Dataset load_dataset(const std::string& manifest_path, int n_classes) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  dataset::Dataset d;
  d.n_classes = n_classes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const std::exception&) {
      throw std::runtime_error("malformed manifest line " + std::to_string(line_no) + " in " +
                               manifest_path);
    }
    auto s = audio::load_wav(rec.at("path").get<std::string>());
    s.label = rec.at("label").get<int>();
    d.samples.push_back(std::move(s));
  }
  if (n_classes <= 0) {
    int mx = -1;
    for (const auto& s : d.samples) mx = std::max(mx, s.label);
    d.n_classes = mx + 1;
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Per-run artifact index
// ---------------------------------------------------------------------------

class ArtifactIndex {
 public:
  ArtifactIndex(std::string out_dir, std::string command, std::uint64_t seed)
      : out_dir_(std::move(out_dir)), command_(std::move(command)), seed_(seed) {}

  std::string path(const std::string& name) const {
    return (std::filesystem::path(out_dir_) / name).string();
  }
  void add(const std::string& kind, const std::string& name) { entries_[kind] = name; }

  void write() const {
    json j;
    j["command"] = command_;
    j["seed"] = seed_;
    j["artifacts"] = entries_;
    auto out = open_out(path("manifest.json"));
    out << j.dump(2) << '\n';
  }

 private:
  std::string out_dir_;
  std::string command_;
  std::uint64_t seed_ = 0;
  std::map<std::string, std::string> entries_;
};

}  // namespace taint::io
