#pragma once

#include <string>
#include <vector>

namespace zoorun {

// Ordered axis labels drawn from the closed alphabet {b,i,c,z,y,x,t}.
class Axes {
 public:
  Axes() = default;
  // Throws BadAxes on empty string, duplicate or unknown letters.
  explicit Axes(const std::string& labels);

  const std::string& str() const { return labels_; }
  size_t rank() const { return labels_.size(); }
  char operator[](size_t i) const { return labels_[i]; }

  bool has(char label) const;
  // Index of label, or -1 when absent.
  int index_of(char label) const;
  bool is_permutation_of(const Axes& other) const;

  // permutation[i] = index in *this of other's i-th label.
  std::vector<size_t> permutation_to(const Axes& other) const;

  static bool is_valid_label(char c);
  static bool spatial(char c) { return c == 'z' || c == 'y' || c == 'x'; }

  friend bool operator==(const Axes& a, const Axes& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::string labels_;
};

}  // namespace zoorun
