#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "qdhf/types.hpp"

namespace qdhf {

/// Reference plus two candidates, identified by individual id.
struct Triplet {
  IndividualId ref = 0;
  IndividualId a = 0;
  IndividualId b = 0;

  bool operator==(const Triplet&) const = default;
};

enum class Choice { ACloser, BCloser };
enum class JudgeSource { Oracle, Human };

/// A resolved 2AFC answer.
struct Judgment {
  Triplet triplet;
  Choice choice = Choice::ACloser;
  JudgeSource source = JudgeSource::Oracle;

  [[nodiscard]] IndividualId preferred() const {
    return choice == Choice::ACloser ? triplet.a : triplet.b;
  }
  [[nodiscard]] IndividualId other() const {
    return choice == Choice::ACloser ? triplet.b : triplet.a;
  }
};

inline Choice flip(Choice c) { return c == Choice::ACloser ? Choice::BCloser : Choice::ACloser; }

inline std::string to_string(Choice c) { return c == Choice::ACloser ? "A" : "B"; }
inline std::string to_string(JudgeSource s) { return s == JudgeSource::Oracle ? "oracle" : "human"; }

using FeatureStore = std::unordered_map<IndividualId, Vec>;

inline const Vec& lookup(const FeatureStore& store, IndividualId id) {
  auto it = store.find(id);
  if (it == store.end()) {
    throw InvalidArgument("no features recorded for individual " + std::to_string(id));
  }
  return it->second;
}

}  // namespace qdhf
