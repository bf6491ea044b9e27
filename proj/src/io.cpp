#include "cape/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "cape/error.hpp"

namespace cape {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'G', 'R', 'D'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw Error(ErrorKind::parse, "CGRD: truncated stream");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::parse, "cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::parse, "cannot open " + path.string());
  return is;
}

}  // namespace

void write_cgrd(std::ostream& os, const ScalarGrid& grid) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint8_t>(os, kVersion);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(grid.shape().ndim()));
  for (auto e : grid.shape().extents()) put_le<std::uint64_t>(os, e);
  for (float v : grid.values()) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

void write_cgrd(const std::filesystem::path& path, const ScalarGrid& grid) {
  auto os = open_out(path);
  write_cgrd(os, grid);
}

void write_cgrd(const std::filesystem::path& path, const BinaryMask& mask) {
  ScalarGrid g(mask.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) g[i] = mask[i] ? 1.0f : 0.0f;
  write_cgrd(path, g);
}

ScalarGrid read_cgrd(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw Error(ErrorKind::parse, "CGRD: bad magic");
  if (const auto version = get_le<std::uint8_t>(is); version != kVersion)
    throw Error(ErrorKind::parse, "CGRD: unsupported version " + std::to_string(version));
  const auto ndim = get_le<std::uint8_t>(is);
  if (ndim != 2 && ndim != 3) throw Error(ErrorKind::parse, "CGRD: ndim must be 2 or 3");
  std::vector<std::size_t> extents;
  std::size_t total = 1;
  for (int i = 0; i < ndim; ++i) {
    const auto e = get_le<std::uint64_t>(is);
    if (e == 0 || e > (1ull << 32)) throw Error(ErrorKind::parse, "CGRD: invalid extent");
    extents.push_back(static_cast<std::size_t>(e));
    total *= static_cast<std::size_t>(e);
    if (total > (1ull << 34)) throw Error(ErrorKind::parse, "CGRD: grid too large");
  }
  std::vector<float> data(total);
  for (auto& v : data) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::parse, "CGRD: trailing bytes");
  return ScalarGrid(Shape(extents), std::move(data));
}

ScalarGrid read_cgrd(const std::filesystem::path& path) {
  auto is = open_in(path);
  try {
    return read_cgrd(is);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

BinaryMask read_cgrd_mask(const std::filesystem::path& path) {
  const auto g = read_cgrd(path);
  BinaryMask m(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] != 0.0f) m.set(i);
  return m;
}

void write_pgm(const std::filesystem::path& path, const ScalarGrid& grid) {
  if (grid.shape().ndim() != 2) throw Error(ErrorKind::unsupported_dimensionality, "PGM export needs a 2D grid");
  const auto vals = grid.values();
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const float range = *hi - *lo;
  auto os = open_out(path);
  os << "P5\n" << grid.shape().cols() << " " << grid.shape().rows() << "\n255\n";
  for (float v : vals) {
    const float t = range > 0.0f ? (v - *lo) / range : 0.0f;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0f))));
  }
}

std::string graph_to_json(const GroundTruthGraph& g) {
  nlohmann::ordered_json j;
  j["ndim"] = g.ndim();
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& p : g.nodes()) {
    if (g.ndim() == 3)
      nodes.push_back({p.z, p.y, p.x});
    else
      nodes.push_back({p.y, p.x});
  }
  j["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) edges.push_back({e.a, e.b});
  j["edges"] = std::move(edges);
  return j.dump();
}

GroundTruthGraph graph_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const int ndim = j.at("ndim").get<int>();
    if (ndim != 2 && ndim != 3) throw Error(ErrorKind::parse, "graph JSON: ndim must be 2 or 3");
    std::vector<Point> nodes;
    for (const auto& n : j.at("nodes")) {
      const auto c = n.get<std::vector<double>>();
      if (c.size() != static_cast<std::size_t>(ndim)) throw Error(ErrorKind::parse, "graph JSON: node arity mismatch");
      nodes.push_back(ndim == 3 ? Point{c[0], c[1], c[2]} : Point{0.0, c[0], c[1]});
    }
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (const auto& e : j.at("edges")) {
      const auto ab = e.get<std::vector<std::int64_t>>();
      if (ab.size() != 2 || ab[0] < 0 || ab[1] < 0) throw Error(ErrorKind::parse, "graph JSON: malformed edge");
      edges.emplace_back(static_cast<NodeId>(ab[0]), static_cast<NodeId>(ab[1]));
    }
    return GroundTruthGraph::from_coordinates(ndim, std::move(nodes), edges);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("graph JSON: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::parse, e.what());
  }
}

void write_graph(const std::filesystem::path& path, const GroundTruthGraph& g) { write_text(path, graph_to_json(g) + "\n"); }

GroundTruthGraph read_graph(const std::filesystem::path& path) {
  try {
    return graph_from_json(read_text(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  auto is = open_in(path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
}

}  // namespace cape
