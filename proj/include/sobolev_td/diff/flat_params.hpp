#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sobolev_td {

/// A contiguous parameter vector partitioned into named, non-overlapping
/// segments that together cover every coordinate.
class FlatParams {
 public:
  struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  FlatParams() = default;

  /// Appends a zero-filled segment and returns its offset.
  std::size_t add_segment(std::string name, std::size_t size);

  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::string_view name) const;
  const Segment& segment_info(std::string_view name) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::size_t size() const { return values_.size(); }
  const std::vector<Segment>& layout() const { return layout_; }

  /// Same segment names and sizes in the same order.
  bool same_layout(const FlatParams& other) const;

  friend bool operator==(const FlatParams&, const FlatParams&) = default;

 private:
  std::vector<double> values_;
  std::vector<Segment> layout_;
};

inline bool operator==(const FlatParams::Segment& a, const FlatParams::Segment& b) {
  return a.name == b.name && a.offset == b.offset && a.size == b.size;
}

/// Versioned flat text: a header line, the segment count, then for each
/// segment a "name size" line followed by its values, one per line.
void save_params(std::ostream& os, const FlatParams& p);
/// Throws std::runtime_error on a bad header or truncated data.
FlatParams load_params(std::istream& is);

}  // namespace sobolev_td
