#include "sobolev_td/diff/flat_params.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace sobolev_td {

std::size_t FlatParams::add_segment(std::string name, std::size_t size) {
  for (const auto& s : layout_) {
    if (s.name == name) throw std::invalid_argument("FlatParams: duplicate segment " + name);
  }
  const std::size_t offset = values_.size();
  layout_.push_back({std::move(name), offset, size});
  values_.resize(offset + size, 0.0);
  return offset;
}

const FlatParams::Segment& FlatParams::segment_info(std::string_view name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("FlatParams: no segment named " + std::string(name));
}

std::span<double> FlatParams::segment(std::string_view name) {
  const auto& s = segment_info(name);
  return std::span<double>(values_).subspan(s.offset, s.size);
}

std::span<const double> FlatParams::segment(std::string_view name) const {
  const auto& s = segment_info(name);
  return std::span<const double>(values_).subspan(s.offset, s.size);
}

bool FlatParams::same_layout(const FlatParams& other) const { return layout_ == other.layout_; }

namespace {
constexpr const char* kParamsHeader = "# sobolev_td params v1";
}

void save_params(std::ostream& os, const FlatParams& p) {
  os << kParamsHeader << '\n' << std::setprecision(17);
  os << "segments " << p.layout().size() << '\n';
  for (const auto& seg : p.layout()) {
    os << seg.name << ' ' << seg.size << '\n';
    for (std::size_t i = 0; i < seg.size; ++i) os << p[seg.offset + i] << '\n';
  }
}

FlatParams load_params(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kParamsHeader) throw std::runtime_error("params: bad header");
  std::string key;
  std::size_t count = 0;
  if (!(is >> key >> count) || key != "segments") throw std::runtime_error("params: missing segment count");
  FlatParams p;
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    std::size_t size = 0;
    if (!(is >> name >> size)) throw std::runtime_error("params: truncated segment header");
    const std::size_t off = p.add_segment(name, size);
    for (std::size_t i = 0; i < size; ++i) {
      if (!(is >> p[off + i])) throw std::runtime_error("params: truncated values in segment " + name);
    }
  }
  return p;
}

}  // namespace sobolev_td
