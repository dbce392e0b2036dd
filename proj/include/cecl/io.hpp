// File formats: JSONL datasets and bench items, hard-negative augmentation
// records, JSON checkpoints, metrics logs, digests, and run manifests.
#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cecl/encoder.hpp"
#include "cecl/evalbench.hpp"
#include "cecl/hardneg.hpp"
#include "cecl/synthworld.hpp"
#include "cecl/trainer.hpp"

namespace cecl::io {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kCheckpointFormat = "cecl-ckpt-v1";

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Small file helpers

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move " + tmp + " into place");
}

// FNV-1a 64-bit content digest, printed as 16 hex digits.
inline std::string digest_bytes(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string digest_file(const std::string& path) {
  return digest_bytes(read_file(path));
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Synthetic world records

inline json scene_to_json(const synthworld::Scene& s, const synthworld::WorldSpec& w) {
  auto obj = [&w](const synthworld::ObjectSpec& o) {
    return json{{"shape", w.shapes[o.shape]},
                {"color", w.colors[o.color]},
                {"size", w.sizes[o.size]}};
  };
  return json{{"obj1", obj(s.obj1)},
              {"obj2", obj(s.obj2)},
              {"relation", synthworld::relation_name(s.relation)},
              {"action", w.actions[s.action]}};
}

inline synthworld::Scene scene_from_json(const json& j, const synthworld::WorldSpec& w) {
  auto index_of = [](const std::vector<std::string>& xs, const std::string& x) {
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (xs[i] == x) return i;
    throw DataError("unknown world word: " + x);
  };
  auto obj = [&](const json& o) {
    synthworld::ObjectSpec spec;
    spec.shape = index_of(w.shapes, o.at("shape").get<std::string>());
    spec.color = index_of(w.colors, o.at("color").get<std::string>());
    spec.size = index_of(w.sizes, o.at("size").get<std::string>());
    return spec;
  };
  synthworld::Scene s;
  s.obj1 = obj(j.at("obj1"));
  s.obj2 = obj(j.at("obj2"));
  s.relation = synthworld::relation_from_name(j.at("relation").get<std::string>());
  s.action = index_of(w.actions, j.at("action").get<std::string>());
  return s;
}

inline json dataset_record_to_json(const synthworld::DatasetRecord& r,
                                   const synthworld::WorldSpec& w) {
  return json{{"id", r.id},
              {"feature", r.feature},
              {"caption", r.caption},
              {"scene", scene_to_json(r.scene, w)}};
}

struct LoadedRecord {
  std::string id;
  Vec feature;
  std::string caption;
};

inline std::vector<LoadedRecord> load_dataset(const std::string& path) {
  std::vector<LoadedRecord> out;
  for (const json& j : read_jsonl(path)) {
    LoadedRecord r;
    r.id = j.at("id").get<std::string>();
    r.feature = j.at("feature").get<Vec>();
    r.caption = j.at("caption").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

// --------------------------------------------------------------------------
// Hard-negative augmentation records

inline json hardneg_record_to_json(const std::string& id, const std::string& caption,
                                   const hardneg::HardNegativeSet& set) {
  return json{{"id", id},
              {"caption", caption},
              {"hn_rel", set.rel().str()},
              {"hn_att", set.att().str()},
              {"hn_act", set.act().str()},
              {"hn_obj", set.obj().str()}};
}

struct HardNegRecord {
  std::string id;
  std::string caption;
  std::array<std::string, hardneg::kNumNegTypes> negs;  // may hold the sentinel
};

inline std::vector<HardNegRecord> load_hardnegs(const std::string& path) {
  std::vector<HardNegRecord> out;
  for (const json& j : read_jsonl(path)) {
    HardNegRecord r;
    r.id = j.at("id").get<std::string>();
    r.caption = j.at("caption").get<std::string>();
    r.negs[0] = j.at("hn_rel").get<std::string>();
    r.negs[1] = j.at("hn_att").get<std::string>();
    r.negs[2] = j.at("hn_act").get<std::string>();
    r.negs[3] = j.at("hn_obj").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

// Join dataset records with their augmentation rows by id.
inline std::vector<trainer::TrainRecord> join_train_records(
    const std::vector<LoadedRecord>& data, const std::vector<HardNegRecord>& hns) {
  std::unordered_map<std::string, const HardNegRecord*> by_id;
  for (const auto& h : hns) by_id[h.id] = &h;
  std::vector<trainer::TrainRecord> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    trainer::TrainRecord r;
    r.id = d.id;
    r.feature = d.feature;
    r.caption = d.caption;
    auto it = by_id.find(d.id);
    if (it != by_id.end()) {
      if (it->second->caption != d.caption)
        throw DataError("caption mismatch between dataset and hard negatives for id " +
                        d.id);
      for (std::size_t k = 0; k < hardneg::kNumNegTypes; ++k)
        if (it->second->negs[k] != hardneg::kPlaceholder)
          r.negs[k] = it->second->negs[k];
    }
    out.push_back(std::move(r));
  }
  return out;
}

// --------------------------------------------------------------------------
// Bench items

inline json bench_item_to_json(const evalbench::BenchItem& item) {
  json negs = json::array();
  for (const auto& n : item.negatives)
    negs.push_back({{"caption", n.caption}, {"type", hardneg::to_string(n.type)}});
  return json{{"id", item.id},
              {"feature", item.feature},
              {"positive", item.positive},
              {"negatives", negs}};
}

inline std::vector<evalbench::BenchItem> load_bench_items(const std::string& path) {
  std::vector<evalbench::BenchItem> out;
  for (const json& j : read_jsonl(path)) {
    evalbench::BenchItem item;
    item.id = j.at("id").get<std::string>();
    item.feature = j.at("feature").get<Vec>();
    item.positive = j.at("positive").get<std::string>();
    for (const json& n : j.at("negatives"))
      item.negatives.push_back(
          {n.at("caption").get<std::string>(),
           hardneg::neg_type_from_string(n.at("type").get<std::string>())});
    out.push_back(std::move(item));
  }
  return out;
}

// --------------------------------------------------------------------------
// Checkpoints: versioned JSON with row-major 64-bit tensors.

inline json mat_to_json(const Mat& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

inline Mat mat_from_json(const json& j) {
  Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.a = j.at("data").get<Vec>();
  if (m.a.size() != m.rows * m.cols) throw DataError("tensor shape mismatch");
  return m;
}

struct Checkpoint {
  encoder::ModelParams params;
  std::vector<std::string> vocab;
  losses::ThresholdState thresholds;
  long long step = 0;
  std::optional<trainer::OptState> opt;
};

inline json checkpoint_to_json(const Checkpoint& c) {
  json j{{"format", kCheckpointFormat},
         {"dims",
          {{"vocab", c.params.vocab},
           {"d_embed", c.params.d_embed},
           {"d_out", c.params.d_out},
           {"d_image", c.params.d_image}}},
         {"vocab", c.vocab},
         {"log_tau", c.params.log_tau},
         {"step", c.step},
         {"thresholds", {{"th", c.thresholds.th}, {"step", c.thresholds.step}}},
         {"tensors",
          {{"E", mat_to_json(c.params.E)},
           {"W_t", mat_to_json(c.params.W_t)},
           {"b_t", c.params.b_t},
           {"W_i", mat_to_json(c.params.W_i)},
           {"b_i", c.params.b_i}}}};
  if (c.opt)
    j["optimizer"] = {{"m", c.opt->m}, {"v", c.opt->v}, {"steps", c.opt->steps}};
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (j.at("format").get<std::string>() != kCheckpointFormat)
    throw DataError("unsupported checkpoint format");
  Checkpoint c;
  const json& dims = j.at("dims");
  c.params.vocab = dims.at("vocab").get<std::size_t>();
  c.params.d_embed = dims.at("d_embed").get<std::size_t>();
  c.params.d_out = dims.at("d_out").get<std::size_t>();
  c.params.d_image = dims.at("d_image").get<std::size_t>();
  c.vocab = j.at("vocab").get<std::vector<std::string>>();
  c.params.log_tau = j.at("log_tau").get<double>();
  c.step = j.at("step").get<long long>();
  c.thresholds.th = j.at("thresholds").at("th").get<std::array<double, 4>>();
  c.thresholds.step = j.at("thresholds").at("step").get<long long>();
  const json& t = j.at("tensors");
  c.params.E = mat_from_json(t.at("E"));
  c.params.W_t = mat_from_json(t.at("W_t"));
  c.params.b_t = t.at("b_t").get<Vec>();
  c.params.W_i = mat_from_json(t.at("W_i"));
  c.params.b_i = t.at("b_i").get<Vec>();
  if (j.contains("optimizer")) {
    trainer::OptState opt;
    opt.m = j.at("optimizer").at("m").get<Vec>();
    opt.v = j.at("optimizer").at("v").get<Vec>();
    opt.steps = j.at("optimizer").at("steps").get<long long>();
    c.opt = std::move(opt);
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  write_file_atomic(path, checkpoint_to_json(c).dump());
}

inline Checkpoint load_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw DataError("bad checkpoint " + path + ": " + e.what());
  }
}

// Vocabulary as stored in a checkpoint -> lexicon-backed id lookup. Classes
// are not needed for scoring, only the word -> id order.
inline textproc::Lexicon lexicon_from_vocab(const std::vector<std::string>& vocab) {
  textproc::Lexicon lex("checkpoint-vocab");
  for (const auto& w : vocab) lex.add(w, textproc::PosClass::OTHER);
  return lex;
}

// --------------------------------------------------------------------------
// Metrics

inline json metrics_to_json(const trainer::MetricsRecord& r) {
  auto opt_arr = [](const std::array<std::optional<double>, 4>& xs) {
    json arr = json::array();
    for (const auto& x : xs) {
      if (x)
        arr.push_back(*x);
      else
        arr.push_back(nullptr);
    }
    return arr;
  };
  return json{{"step", r.step},
              {"epoch", r.epoch},
              {"loss_itc", r.loss_itc},
              {"loss_imc", r.loss_imc},
              {"loss_cmr", r.loss_cmr},
              {"loss_total", r.loss_total},
              {"th", r.th},
              {"gap_mean", opt_arr(r.gap_mean)},
              {"hinge_rate", opt_arr(r.hinge_rate)},
              {"mean_hn_sim", opt_arr(r.mean_hn_sim)},
              {"mean_pos_sim", r.mean_pos_sim}};
}

inline std::string metrics_to_jsonl(const std::vector<trainer::MetricsRecord>& ms) {
  std::string out;
  for (const auto& m : ms) {
    out += metrics_to_json(m).dump();
    out.push_back('\n');
  }
  return out;
}

// --------------------------------------------------------------------------
// Eval reports

inline json eval_report_to_json(const evalbench::EvalReport& r) {
  json per_type = json::object();
  for (std::size_t k = 0; k < hardneg::kNumNegTypes; ++k) {
    per_type[hardneg::to_string(static_cast<hardneg::NegType>(k))] = {
        {"correct", r.correct[k]},
        {"total", r.total[k]},
        {"accuracy", r.accuracy(k)}};
  }
  return json{{"overall",
               {{"correct", r.correct[4]},
                {"total", r.total[4]},
                {"accuracy", r.accuracy()}}},
              {"per_type", per_type}};
}

inline std::string eval_report_table(const evalbench::EvalReport& r) {
  char buf[96];
  std::string out = "type     pairs  correct  accuracy\n";
  auto row = [&](const char* name, std::size_t k) {
    std::snprintf(buf, sizeof buf, "%-7s %6zu  %7zu  %8.4f\n", name, r.total[k],
                  r.correct[k], r.accuracy(k));
    out += buf;
  };
  for (std::size_t k = 0; k < hardneg::kNumNegTypes; ++k)
    row(hardneg::to_string(static_cast<hardneg::NegType>(k)), k);
  row("ALL", 4);
  return out;
}

}  // namespace cecl::io
