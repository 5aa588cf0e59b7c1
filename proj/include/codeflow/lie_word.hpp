#pragma once

#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "codeflow/poly_vf.hpp"

namespace codeflow {

/// Binary bracketing tree over generator indices. Leaves hold a 0-based
/// generator index; serialization uses the 1-based convention.
class LieWord {
 public:
  static LieWord leaf(int generator) {
    LieWord w;
    w.gen_ = generator;
    return w;
  }

  static LieWord bracket(const LieWord& left, const LieWord& right) {
    LieWord w;
    w.left_ = std::make_shared<const LieWord>(left);
    w.right_ = std::make_shared<const LieWord>(right);
    return w;
  }

  bool is_leaf() const { return gen_ >= 0; }
  int generator() const { return gen_; }
  const LieWord& left() const { return *left_; }
  const LieWord& right() const { return *right_; }

  /// Number of generator leaves (the free-Lie-algebra degree of the word).
  int length() const {
    if (is_leaf()) return 1;
    return left_->length() + right_->length();
  }

  /// Substitutes concrete polynomial fields for the leaves.
  PolyVectorField evaluate(std::span<const PolyVectorField> generators) const {
    if (is_leaf()) {
      if (gen_ < 0 || gen_ >= static_cast<int>(generators.size()))
        throw std::out_of_range("LieWord::evaluate: generator index out of range");
      return generators[gen_];
    }
    return lie_bracket(left_->evaluate(generators), right_->evaluate(generators));
  }

  nlohmann::json to_json() const {
    if (is_leaf()) return gen_ + 1;
    return nlohmann::json::array({left_->to_json(), right_->to_json()});
  }

  static LieWord from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return leaf(j.get<int>() - 1);
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("LieWord::from_json: expected int or pair");
    return bracket(from_json(j[0]), from_json(j[1]));
  }

  std::string to_string() const {
    if (is_leaf()) return std::to_string(gen_ + 1);
    return "[" + left_->to_string() + "," + right_->to_string() + "]";
  }

 private:
  LieWord() = default;
  int gen_ = -1;
  std::shared_ptr<const LieWord> left_, right_;
};

}  // namespace codeflow
