#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentbo/io/blob.hpp"
#include "latentbo/math/rng.hpp"
#include "latentbo/vae/model.hpp"

namespace latentbo::tasks {

enum class TaskKind { shape, sequence };
using Input = std::vector<std::uint8_t>;

inline const char* task_kind_name(TaskKind k) { return k == TaskKind::shape ? "shape" : "sequence"; }

// Black-box benchmark: a structured input space, a deterministic objective,
// and a known maximizer kept out of every generated dataset.
struct Task {
  TaskKind kind = TaskKind::shape;
  int grid_side = 16;
  int seq_len = 8;
  int alphabet = 6;
  std::uint64_t task_seed = 0;
  Input x_star;
  double f_star = 0.0;

  int input_size() const { return kind == TaskKind::shape ? grid_side * grid_side : seq_len; }

  vae::InputCodec codec() const {
    vae::InputCodec c;
    if (kind == TaskKind::shape) {
      c.kind = vae::InputKind::binary_grid;
      c.grid_pixels = grid_side * grid_side;
    } else {
      c.kind = vae::InputKind::token_seq;
      c.seq_len = seq_len;
      c.alphabet = alphabet;
    }
    return c;
  }

  double objective(const Input& x) const;
  double similarity(const Input& a, const Input& b) const;
};

// ---- shape task internals ----

inline double cosine_similarity(const Input& a, const Input& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: size mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;  // all-zero image convention
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Union of 1-4 random axis-aligned rectangles and ellipses on a binary grid.
inline Input random_shape(int side, math::Rng& rng) {
  Input img(static_cast<std::size_t>(side) * side, 0);
  const int pieces = 1 + rng.uniform_int(4);
  for (int p = 0; p < pieces; ++p) {
    if (rng.uniform() < 0.5) {
      int x0 = rng.uniform_int(side - 2), y0 = rng.uniform_int(side - 2);
      int w = 2 + rng.uniform_int(side / 2), h = 2 + rng.uniform_int(side / 2);
      for (int y = y0; y < std::min(side, y0 + h); ++y)
        for (int x = x0; x < std::min(side, x0 + w); ++x)
          img[static_cast<std::size_t>(y) * side + x] = 1;
    } else {
      const double cx = rng.uniform(2.0, side - 2.0), cy = rng.uniform(2.0, side - 2.0);
      const double rx = rng.uniform(1.5, side / 3.0), ry = rng.uniform(1.5, side / 3.0);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double dx = (x - cx) / rx, dy = (y - cy) / ry;
          if (dx * dx + dy * dy <= 1.0) img[static_cast<std::size_t>(y) * side + x] = 1;
        }
    }
  }
  return img;
}

// ---- sequence task internals ----

// Token pairs encode the four coefficients of a cubic; a one-token edit moves
// the polynomial by a coarse or fine step, so small input changes can swing
// the objective.
inline double token_value(int tok, int alphabet) {
  return (2.0 * tok - (alphabet - 1)) / (alphabet - 1);
}

inline std::array<double, 4> sequence_coefficients(const Input& x, int alphabet) {
  if (x.size() != 8) throw std::invalid_argument("sequence_coefficients: length-8 input required");
  std::array<double, 4> c{};
  for (int i = 0; i < 4; ++i)
    c[static_cast<std::size_t>(i)] = token_value(x[static_cast<std::size_t>(2 * i)], alphabet) +
                                     token_value(x[static_cast<std::size_t>(2 * i + 1)], alphabet) / alphabet;
  return c;
}

constexpr int kSequenceGridPoints = 64;

inline double sequence_mse(const std::array<double, 4>& c, const std::array<double, 4>& target) {
  double mse = 0.0;
  for (int g = 0; g < kSequenceGridPoints; ++g) {
    const double u = -1.0 + 2.0 * g / (kSequenceGridPoints - 1);
    double pu = 0.0, pt = 0.0, up = 1.0;
    for (int k = 0; k < 4; ++k) {
      pu += c[static_cast<std::size_t>(k)] * up;
      pt += target[static_cast<std::size_t>(k)] * up;
      up *= u;
    }
    mse += (pu - pt) * (pu - pt);
  }
  return mse / kSequenceGridPoints;
}

inline Input random_sequence(int len, int alphabet, math::Rng& rng) {
  Input x(static_cast<std::size_t>(len));
  for (auto& t : x) t = static_cast<std::uint8_t>(rng.uniform_int(alphabet));
  return x;
}

inline double Task::objective(const Input& x) const {
  if (static_cast<int>(x.size()) != input_size())
    throw std::invalid_argument("objective: input size mismatch");
  if (kind == TaskKind::shape) return cosine_similarity(x, x_star);
  return -sequence_mse(sequence_coefficients(x, alphabet), sequence_coefficients(x_star, alphabet));
}

inline double Task::similarity(const Input& a, const Input& b) const {
  if (kind == TaskKind::shape) return cosine_similarity(a, b);
  if (a.size() != b.size()) throw std::invalid_argument("similarity: size mismatch");
  int match = 0;
  for (std::size_t i = 0; i < a.size(); ++i) match += a[i] == b[i];
  return static_cast<double>(match) / static_cast<double>(a.size());
}

inline Task make_task(TaskKind kind, std::uint64_t task_seed) {
  Task t;
  t.kind = kind;
  t.task_seed = task_seed;
  math::Rng rng(task_seed ^ 0x7461736b5f676eULL);
  if (kind == TaskKind::shape) {
    t.x_star = random_shape(t.grid_side, rng);
    bool any = false;
    for (auto v : t.x_star) any |= v != 0;
    if (!any) t.x_star[t.x_star.size() / 2] = 1;
    t.f_star = 1.0;
  } else {
    t.x_star = random_sequence(t.seq_len, t.alphabet, rng);
    t.f_star = 0.0;
  }
  return t;
}

struct Dataset {
  std::vector<Input> inputs;
  std::vector<double> labels;

  int size() const { return static_cast<int>(inputs.size()); }
};

// Procedural inputs with labels; the known maximizer is excluded and the top
// 3% scoring candidates are dropped so optimization has room to improve.
inline Dataset generate_dataset(const Task& task, int n, math::Rng& rng) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  Dataset out;
  std::vector<Input> cand;
  std::vector<double> labels;
  while (out.size() < n) {
    const int need = std::max(n + 8, static_cast<int>(std::ceil(n / 0.97)) + 8);
    while (static_cast<int>(cand.size()) < need) {
      Input x = task.kind == TaskKind::shape ? random_shape(task.grid_side, rng)
                                             : random_sequence(task.seq_len, task.alphabet, rng);
      if (x == task.x_star) continue;
      labels.push_back(task.objective(x));
      cand.push_back(std::move(x));
    }
    std::vector<double> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    const int drop = static_cast<int>(std::ceil(0.03 * static_cast<double>(sorted.size())));
    const double cutoff = sorted[sorted.size() - static_cast<std::size_t>(drop)];
    out.inputs.clear();
    out.labels.clear();
    for (std::size_t i = 0; i < cand.size() && out.size() < n; ++i) {
      if (labels[i] >= cutoff) continue;
      out.inputs.push_back(cand[i]);
      out.labels.push_back(labels[i]);
    }
    if (out.size() < n) {
      // truncation removed too much; extend the candidate pool and retry
      const int extra = need / 2 + 8;
      for (int k = 0; k < extra; ++k) {
        Input x = task.kind == TaskKind::shape ? random_shape(task.grid_side, rng)
                                               : random_sequence(task.seq_len, task.alphabet, rng);
        if (x == task.x_star) continue;
        labels.push_back(task.objective(x));
        cand.push_back(std::move(x));
      }
    }
  }
  return out;
}

// ---- dataset file format: JSON header + packed bits / token bytes + f64 labels ----

inline nlohmann::json task_to_json(const Task& t) {
  return {{"kind", task_kind_name(t.kind)}, {"grid_side", t.grid_side},
          {"seq_len", t.seq_len},           {"alphabet", t.alphabet},
          {"task_seed", t.task_seed},       {"x_star", t.x_star},
          {"f_star", t.f_star}};
}

inline Task task_from_json(const nlohmann::json& j) {
  Task t;
  t.kind = j["kind"] == "shape" ? TaskKind::shape : TaskKind::sequence;
  t.grid_side = j["grid_side"];
  t.seq_len = j["seq_len"];
  t.alphabet = j["alphabet"];
  t.task_seed = j["task_seed"];
  t.x_star = j["x_star"].get<Input>();
  t.f_star = j["f_star"];
  return t;
}

inline void save_dataset(const std::string& path, const Task& task, const Dataset& data,
                         const nlohmann::json& meta = {}) {
  io::Blob blob;
  blob.header = {{"format", "latentbo-dataset"},
                 {"version", 1},
                 {"task", task_to_json(task)},
                 {"count", data.size()},
                 {"meta", meta}};
  if (task.kind == TaskKind::shape) {
    const int pixels = task.grid_side * task.grid_side;
    const int bytes_per = (pixels + 7) / 8;
    for (const auto& x : data.inputs) {
      std::vector<std::uint8_t> packed(static_cast<std::size_t>(bytes_per), 0);
      for (int p = 0; p < pixels; ++p)
        if (x[static_cast<std::size_t>(p)]) packed[static_cast<std::size_t>(p / 8)] |= static_cast<std::uint8_t>(1u << (p % 8));
      blob.payload.insert(blob.payload.end(), packed.begin(), packed.end());
    }
  } else {
    for (const auto& x : data.inputs) blob.payload.insert(blob.payload.end(), x.begin(), x.end());
  }
  io::append_f64(blob.payload, data.labels.data(), data.labels.size());
  io::write_blob(path, blob);
}

struct LoadedDataset {
  Task task;
  Dataset data;
  nlohmann::json meta;
};

inline LoadedDataset load_dataset(const std::string& path) {
  io::Blob blob = io::read_blob(path);
  if (blob.header.value("format", "") != "latentbo-dataset")
    throw std::runtime_error("not a latentbo dataset: " + path);
  LoadedDataset out;
  out.task = task_from_json(blob.header["task"]);
  out.meta = blob.header.value("meta", nlohmann::json());
  const int n = blob.header["count"];
  std::size_t cursor = 0;
  if (out.task.kind == TaskKind::shape) {
    const int pixels = out.task.grid_side * out.task.grid_side;
    const int bytes_per = (pixels + 7) / 8;
    for (int i = 0; i < n; ++i) {
      Input x(static_cast<std::size_t>(pixels), 0);
      for (int p = 0; p < pixels; ++p)
        x[static_cast<std::size_t>(p)] =
            (blob.payload[cursor + static_cast<std::size_t>(p / 8)] >> (p % 8)) & 1u;
      cursor += static_cast<std::size_t>(bytes_per);
      out.data.inputs.push_back(std::move(x));
    }
  } else {
    for (int i = 0; i < n; ++i) {
      Input x(blob.payload.begin() + static_cast<std::ptrdiff_t>(cursor),
              blob.payload.begin() + static_cast<std::ptrdiff_t>(cursor + static_cast<std::size_t>(out.task.seq_len)));
      cursor += static_cast<std::size_t>(out.task.seq_len);
      out.data.inputs.push_back(std::move(x));
    }
  }
  out.data.labels.resize(static_cast<std::size_t>(n));
  io::read_f64(blob.payload, cursor, out.data.labels.data(), out.data.labels.size());
  return out;
}

}  // namespace latentbo::tasks
