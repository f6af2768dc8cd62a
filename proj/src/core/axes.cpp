#include "zoorun/axes.hpp"

#include <algorithm>

#include "zoorun/errors.hpp"

namespace zoorun {

bool Axes::is_valid_label(char c) {
  return c == 'b' || c == 'i' || c == 'c' || c == 'z' || c == 'y' ||
         c == 'x' || c == 't';
}

Axes::Axes(const std::string& labels) : labels_(labels) {
  if (labels_.empty()) throw BadAxes("axes string must be non-empty");
  for (size_t i = 0; i < labels_.size(); ++i) {
    char c = labels_[i];
    if (!is_valid_label(c))
      throw BadAxes(std::string("unknown axis label '") + c +
                    "' in axes \"" + labels_ + "\"");
    if (labels_.find(c, i + 1) != std::string::npos)
      throw BadAxes(std::string("duplicate axis label '") + c +
                    "' in axes \"" + labels_ + "\"");
  }
}

bool Axes::has(char label) const {
  return labels_.find(label) != std::string::npos;
}

int Axes::index_of(char label) const {
  auto pos = labels_.find(label);
  return pos == std::string::npos ? -1 : static_cast<int>(pos);
}

bool Axes::is_permutation_of(const Axes& other) const {
  std::string a = labels_, b = other.labels_;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

std::vector<size_t> Axes::permutation_to(const Axes& other) const {
  if (!is_permutation_of(other))
    throw BadAxes("axes \"" + other.labels_ + "\" is not a permutation of \"" +
                  labels_ + "\"");
  std::vector<size_t> perm(other.rank());
  for (size_t i = 0; i < other.rank(); ++i)
    perm[i] = static_cast<size_t>(index_of(other[i]));
  return perm;
}

}  // namespace zoorun
