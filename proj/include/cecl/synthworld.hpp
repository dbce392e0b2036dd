// Controlled compositional micro-world: two attributed objects plus a spatial
// relation or action, rendered to decodable feature vectors and templated
// captions with ground-truth typed negatives for evaluation.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cecl/evalbench.hpp"
#include "cecl/rng.hpp"
#include "cecl/tensor.hpp"
#include "cecl/textproc.hpp"

namespace cecl::synthworld {

using evalbench::BenchItem;
using evalbench::TypedNegative;
using hardneg::NegType;
using textproc::Lexicon;
using textproc::PosClass;

enum class Relation { LeftOf = 0, RightOf = 1, Above = 2, Below = 3 };
inline constexpr std::size_t kNumRelations = 4;

inline Relation mirror(Relation r) {
  switch (r) {
    case Relation::LeftOf: return Relation::RightOf;
    case Relation::RightOf: return Relation::LeftOf;
    case Relation::Above: return Relation::Below;
    case Relation::Below: return Relation::Above;
  }
  return Relation::LeftOf;
}

// Caption words for each relation ("left of", "right of", "above", "below").
inline std::vector<std::string> relation_words(Relation r) {
  switch (r) {
    case Relation::LeftOf: return {"left", "of"};
    case Relation::RightOf: return {"right", "of"};
    case Relation::Above: return {"above"};
    case Relation::Below: return {"below"};
  }
  return {};
}

inline const char* relation_name(Relation r) {
  switch (r) {
    case Relation::LeftOf: return "left_of";
    case Relation::RightOf: return "right_of";
    case Relation::Above: return "above";
    case Relation::Below: return "below";
  }
  return "left_of";
}

inline Relation relation_from_name(const std::string& s) {
  if (s == "left_of") return Relation::LeftOf;
  if (s == "right_of") return Relation::RightOf;
  if (s == "above") return Relation::Above;
  if (s == "below") return Relation::Below;
  throw std::runtime_error("unknown relation: " + s);
}

struct WorldSpec {
  std::vector<std::string> shapes;
  std::vector<std::string> colors;
  std::vector<std::string> sizes;
  std::vector<std::string> actions;

  std::size_t feature_dim() const {
    return 2 * (shapes.size() + colors.size() + sizes.size()) + 4 + actions.size();
  }
};

inline WorldSpec default_world() {
  WorldSpec w;
  w.shapes = {"circle", "square", "triangle", "star", "hexagon", "diamond"};
  w.colors = {"red", "blue", "green", "yellow", "purple", "orange"};
  w.sizes = {"small", "large"};
  w.actions = {"touching", "facing", "pushing"};
  return w;
}

struct ObjectSpec {
  std::size_t shape = 0;
  std::size_t color = 0;
  std::size_t size = 0;

  bool operator==(const ObjectSpec&) const = default;
};

struct Scene {
  ObjectSpec obj1, obj2;
  Relation relation = Relation::LeftOf;
  std::size_t action = 0;

  bool operator==(const Scene&) const = default;
};

// Stable identity key used for the train/eval split.
inline std::string scene_key(const Scene& s) {
  return std::to_string(s.obj1.shape) + "." + std::to_string(s.obj1.color) + "." +
         std::to_string(s.obj1.size) + "|" + std::to_string(s.obj2.shape) + "." +
         std::to_string(s.obj2.color) + "." + std::to_string(s.obj2.size) + "|" +
         std::to_string(static_cast<int>(s.relation)) + "|" + std::to_string(s.action);
}

// Uniform independent draws, re-drawn until the two objects differ somewhere.
inline Scene sample_scene(RngStream& rng, const WorldSpec& w) {
  for (;;) {
    Scene s;
    s.obj1 = {rng.next_below(w.shapes.size()), rng.next_below(w.colors.size()),
              rng.next_below(w.sizes.size())};
    s.obj2 = {rng.next_below(w.shapes.size()), rng.next_below(w.colors.size()),
              rng.next_below(w.sizes.size())};
    s.relation = static_cast<Relation>(rng.next_below(kNumRelations));
    s.action = rng.next_below(w.actions.size());
    if (!(s.obj1 == s.obj2)) return s;
  }
}

enum class TemplateId { RelationTemplate, ActionTemplate };

namespace detail {

inline void append_object(std::string& out, const WorldSpec& w, const ObjectSpec& o) {
  out += "the " + w.colors[o.color] + " " + w.sizes[o.size] + " " + w.shapes[o.shape];
}

// "the {color} {size} {shape} is <link words> the {color} {size} {shape}"
inline std::string render(const WorldSpec& w, const ObjectSpec& first,
                          const ObjectSpec& second,
                          const std::vector<std::string>& link) {
  std::string out;
  append_object(out, w, first);
  out += " is";
  for (const auto& word : link) out += " " + word;
  out += " ";
  append_object(out, w, second);
  return out;
}

}  // namespace detail

// Canonical caption for a scene. Relation templates can also be rendered
// flipped (objects swapped, relation mirrored), which describes the same
// scene with a different string; the dataset builder emits both orientations.
inline std::string caption_of(const Scene& s, const WorldSpec& w, TemplateId tpl,
                              bool flipped = false) {
  if (tpl == TemplateId::ActionTemplate)
    return detail::render(w, s.obj1, s.obj2, {w.actions[s.action]});
  if (flipped)
    return detail::render(w, s.obj2, s.obj1, relation_words(mirror(s.relation)));
  return detail::render(w, s.obj1, s.obj2, relation_words(s.relation));
}

// Feature layout: [shape1|color1|size1|shape2|color2|size2|x1,y1,x2,y2|action]
// one-hot blocks plus unit-square coordinates, all perturbed by U(-sigma, sigma).
inline Vec render_features(const Scene& s, const WorldSpec& w, double sigma,
                           RngStream& rng) {
  Vec f;
  f.reserve(w.feature_dim());
  auto one_hot = [&f](std::size_t idx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f.push_back(i == idx ? 1.0 : 0.0);
  };
  for (const ObjectSpec* o : {&s.obj1, &s.obj2}) {
    one_hot(o->shape, w.shapes.size());
    one_hot(o->color, w.colors.size());
    one_hot(o->size, w.sizes.size());
  }
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  switch (s.relation) {
    case Relation::LeftOf: x1 = -1; x2 = 1; break;
    case Relation::RightOf: x1 = 1; x2 = -1; break;
    case Relation::Above: y1 = 1; y2 = -1; break;
    case Relation::Below: y1 = -1; y2 = 1; break;
  }
  f.push_back(x1);
  f.push_back(y1);
  f.push_back(x2);
  f.push_back(y2);
  one_hot(s.action, w.actions.size());
  if (sigma > 0.0)
    for (double& x : f) x += rng.next_uniform(-sigma, sigma);
  return f;
}

// Inverse of render_features; exact when sigma = 0.
inline Scene decode_features(const Vec& f, const WorldSpec& w) {
  if (f.size() != w.feature_dim())
    throw std::runtime_error("feature length does not match world spec");
  std::size_t pos = 0;
  auto arg_max = [&](std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (f[pos + i] > f[pos + best]) best = i;
    pos += n;
    return best;
  };
  Scene s;
  s.obj1.shape = arg_max(w.shapes.size());
  s.obj1.color = arg_max(w.colors.size());
  s.obj1.size = arg_max(w.sizes.size());
  s.obj2.shape = arg_max(w.shapes.size());
  s.obj2.color = arg_max(w.colors.size());
  s.obj2.size = arg_max(w.sizes.size());
  const double x1 = f[pos], y1 = f[pos + 1], x2 = f[pos + 2], y2 = f[pos + 3];
  pos += 4;
  if (std::abs(x1 - x2) >= std::abs(y1 - y2))
    s.relation = x1 < x2 ? Relation::LeftOf : Relation::RightOf;
  else
    s.relation = y1 > y2 ? Relation::Above : Relation::Below;
  s.action = arg_max(w.actions.size());
  return s;
}

struct DatasetRecord {
  std::string id;
  Vec feature;
  std::string caption;
  Scene scene;
};

struct Dataset {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> eval;
  std::vector<BenchItem> bench;
};

// Vocabulary covering every caption the world can render, plus the POS
// classes the hard-negative generator needs.
inline Lexicon world_lexicon(const WorldSpec& w) {
  Lexicon lex("world-v1");
  for (const char* word : {"the", "is", "of", "a", "an", "and"})
    lex.add(word, PosClass::OTHER);
  for (const auto& s : w.shapes) lex.add(s, PosClass::NOUN);
  for (const auto& c : w.colors) lex.add(c, PosClass::ADJ);
  for (const auto& z : w.sizes) lex.add(z, PosClass::ADJ);
  for (const char* word : {"left", "right", "above", "below"})
    lex.add(word, PosClass::RELWORD);
  for (const auto& v : w.actions) lex.add(v, PosClass::VERB);
  return lex;
}

namespace detail {

// Ground-truth typed negatives: each one contradicts the scene in exactly
// the targeted component, so it is false of the image by construction.
inline std::vector<TypedNegative> build_negatives(const Scene& s, const WorldSpec& w,
                                                  TemplateId tpl, bool flipped,
                                                  RngStream& rng) {
  std::vector<TypedNegative> out;
  const ObjectSpec& first = flipped ? s.obj2 : s.obj1;
  const ObjectSpec& second = flipped ? s.obj1 : s.obj2;
  auto pick_other = [&rng](std::size_t current, std::size_t n) {
    return (current + 1 + rng.next_below(n - 1)) % n;
  };
  if (tpl == TemplateId::RelationTemplate) {
    // Asserts the mirrored spatial order of the two objects.
    const Relation rendered = flipped ? mirror(s.relation) : s.relation;
    out.push_back({render(w, first, second, relation_words(mirror(rendered))),
                   NegType::REL});
  } else if (w.actions.size() > 1) {
    out.push_back(
        {render(w, first, second, {w.actions[pick_other(s.action, w.actions.size())]}),
         NegType::ACT});
  }

  auto link = tpl == TemplateId::RelationTemplate
                  ? relation_words(flipped ? mirror(s.relation) : s.relation)
                  : std::vector<std::string>{w.actions[s.action]};

  // Attribute negative: change the color or size of one rendered object.
  const bool can_color = w.colors.size() > 1;
  const bool can_size = w.sizes.size() > 1;
  if (can_color || can_size) {
    ObjectSpec a = first, b = second;
    ObjectSpec& target = rng.next_below(2) == 0 ? a : b;
    const bool use_color = can_color && (!can_size || rng.next_below(2) == 0);
    if (use_color)
      target.color = pick_other(target.color, w.colors.size());
    else
      target.size = pick_other(target.size, w.sizes.size());
    out.push_back({render(w, a, b, link), NegType::ATT});
  }
  // Object negative: change the shape of one rendered object.
  if (w.shapes.size() > 1) {
    ObjectSpec a = first, b = second;
    ObjectSpec& target = rng.next_below(2) == 0 ? a : b;
    target.shape = pick_other(target.shape, w.shapes.size());
    out.push_back({render(w, a, b, link), NegType::OBJ});
  }
  return out;
}

}  // namespace detail

// n records with a train/eval split by scene identity (no scene appears on
// both sides). Eval records additionally yield BenchItems with ground-truth
// typed negatives.
inline Dataset make_dataset(const WorldSpec& w, std::size_t n, double sigma,
                            std::uint64_t seed, double train_fraction = 0.8) {
  if (n < 1) throw std::runtime_error("make_dataset needs n >= 1");
  struct Draft {
    Scene scene;
    TemplateId tpl;
    bool flipped;
    Vec feature;
    std::string caption;
  };
  std::vector<Draft> drafts;
  drafts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = RngStream::derive(seed, i);
    Draft d;
    d.scene = sample_scene(rng, w);
    d.tpl = rng.next_below(2) == 0 ? TemplateId::RelationTemplate
                                   : TemplateId::ActionTemplate;
    d.flipped = d.tpl == TemplateId::RelationTemplate && rng.next_below(2) == 1;
    d.feature = render_features(d.scene, w, sigma, rng);
    d.caption = caption_of(d.scene, w, d.tpl, d.flipped);
    drafts.push_back(std::move(d));
  }

  // Split unique scene keys, shuffled under a dedicated stream.
  std::vector<std::string> keys;
  std::set<std::string> seen;
  for (const auto& d : drafts) {
    std::string k = scene_key(d.scene);
    if (seen.insert(k).second) keys.push_back(std::move(k));
  }
  RngStream split_rng = RngStream::derive(seed, 0x73706c6974ULL);
  for (std::size_t i = keys.size(); i > 1; --i)
    std::swap(keys[i - 1], keys[split_rng.next_below(i)]);
  const std::size_t n_train =
      static_cast<std::size_t>(train_fraction * static_cast<double>(keys.size()));
  std::set<std::string> train_keys(keys.begin(), keys.begin() + n_train);

  Dataset out;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    auto& d = drafts[i];
    DatasetRecord rec;
    rec.id = "r" + std::to_string(i);
    rec.feature = d.feature;
    rec.caption = d.caption;
    rec.scene = d.scene;
    if (train_keys.count(scene_key(d.scene))) {
      out.train.push_back(std::move(rec));
    } else {
      RngStream neg_rng = RngStream::derive(seed, 0x6e656700ULL + i);
      BenchItem item;
      item.id = rec.id;
      item.feature = rec.feature;
      item.positive = rec.caption;
      item.negatives =
          detail::build_negatives(d.scene, w, d.tpl, d.flipped, neg_rng);
      out.bench.push_back(std::move(item));
      out.eval.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace cecl::synthworld
