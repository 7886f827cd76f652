#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "gfilt/graph/network.hpp"

namespace gfilt {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line)
  {
  }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Network plus the dense-index -> original-id map.
struct LoadedNetwork {
  ContactNetwork net;
  std::vector<std::uint64_t> original_ids;
};

namespace detail {

inline bool parse_id(const std::string& tok, std::uint64_t& out)
{
  if (tok.empty() || tok[0] == '-' || tok[0] == '+') return false;
  std::size_t used = 0;
  try {
    out = std::stoull(tok, &used, 10);
  } catch (const std::exception&) {
    return false;
  }
  return used == tok.size();
}

// Raw integer pairs from an edge-list stream.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> read_pairs(std::istream& in, const std::string& source)
{
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || line[first] == '%') continue;
    std::istringstream ss(line);
    std::string a, b, extra;
    ss >> a >> b;
    if (b.empty()) throw ParseError(source, lineno, "expected two node ids");
    std::uint64_t u = 0, v = 0;
    if (!parse_id(a, u)) throw ParseError(source, lineno, "invalid node id '" + a + "'");
    if (!parse_id(b, v)) throw ParseError(source, lineno, "invalid node id '" + b + "'");
    out.emplace_back(u, v);
  }
  return out;
}

inline ContactNetwork build_remapped(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs,
                                     const std::unordered_map<std::uint64_t, NodeId>& index, std::size_t n,
                                     const std::string& source)
{
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [u, v] : pairs) edges.emplace_back(index.at(u), index.at(v));
  auto net = ContactNetwork::from_edges(n, edges);
  if (net.self_loops_dropped() > 0)
    spdlog::warn("{}: dropped {} self-loop(s)", source, net.self_loops_dropped());
  return net;
}

inline std::unordered_map<std::uint64_t, NodeId> index_of(const std::vector<std::uint64_t>& ids)
{
  std::unordered_map<std::uint64_t, NodeId> m;
  m.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], static_cast<NodeId>(i));
  return m;
}

inline std::vector<std::uint64_t> sorted_unique_ids(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs,
                                                    std::vector<std::uint64_t> ids = {})
{
  ids.reserve(ids.size() + 2 * pairs.size());
  for (auto [u, v] : pairs) {
    ids.push_back(u);
    ids.push_back(v);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace detail

/// Reads a whitespace-separated undirected edge list. Lines starting with
/// '#' or '%' are comments. Node ids are remapped to [0, L) in increasing
/// order of the original id.
inline LoadedNetwork load_edge_list(std::istream& in, const std::string& source = "<stream>")
{
  const auto pairs = detail::read_pairs(in, source);
  LoadedNetwork out;
  out.original_ids = detail::sorted_unique_ids(pairs);
  const auto index = detail::index_of(out.original_ids);
  out.net = detail::build_remapped(pairs, index, out.original_ids.size(), source);
  return out;
}

inline LoadedNetwork load_edge_list(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path.string());
  return load_edge_list(in, path.string());
}

struct LoadedDynamicNetwork {
  DynamicNetwork net;
  std::vector<std::uint64_t> original_ids;
};

/// Reads a manifest listing one snapshot edge-list path per line, in time
/// order. Relative paths resolve against the manifest's directory. All
/// snapshots share one id map built from the union of their ids.
inline LoadedDynamicNetwork load_dynamic_network(const std::filesystem::path& manifest)
{
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
  std::vector<std::filesystem::path> files;
  std::string line;
  while (std::getline(in, line)) {
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos || line[a] == '#') continue;
    const auto b = line.find_last_not_of(" \t\r");
    std::filesystem::path p = line.substr(a, b - a + 1);
    if (p.is_relative()) p = manifest.parent_path() / p;
    files.push_back(p);
  }
  if (files.empty()) throw std::runtime_error("manifest " + manifest.string() + " lists no snapshots");

  std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> all;
  std::vector<std::uint64_t> ids;
  for (const auto& f : files) {
    std::ifstream s(f);
    if (!s) throw std::runtime_error("cannot open snapshot " + f.string());
    all.push_back(detail::read_pairs(s, f.string()));
    ids = detail::sorted_unique_ids(all.back(), std::move(ids));
  }
  const auto index = detail::index_of(ids);
  std::vector<std::shared_ptr<const ContactNetwork>> snaps;
  for (std::size_t i = 0; i < all.size(); ++i)
    snaps.push_back(std::make_shared<const ContactNetwork>(
        detail::build_remapped(all[i], index, ids.size(), files[i].string())));
  return {DynamicNetwork(std::move(snaps)), std::move(ids)};
}

/// Reads "original_id size" lines and attaches subpopulation sizes. Nodes
/// missing from the file keep size `fallback`.
inline void load_subpop_sizes(std::istream& in, const std::vector<std::uint64_t>& original_ids, ContactNetwork& net,
                              int fallback = 1, const std::string& source = "<sizes>")
{
  const auto index = detail::index_of(original_ids);
  std::vector<int> m(net.size(), fallback);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos || line[a] == '#') continue;
    std::istringstream ss(line);
    std::string id_tok, m_tok;
    ss >> id_tok >> m_tok;
    std::uint64_t id = 0, size = 0;
    if (!detail::parse_id(id_tok, id) || !detail::parse_id(m_tok, size) || size < 1)
      throw ParseError(source, lineno, "expected '<node id> <size >= 1>'");
    auto it = index.find(id);
    if (it == index.end()) throw ParseError(source, lineno, "unknown node id " + id_tok);
    m[it->second] = static_cast<int>(size);
  }
  net.set_subpop_sizes(std::move(m));
}

struct DegreeStats {
  std::size_t nodes = 0, edges = 0, min_degree = 0, max_degree = 0, isolated = 0;
  double mean_degree = 0;
};

inline DegreeStats degree_stats(const ContactNetwork& net)
{
  DegreeStats s;
  s.nodes = net.size();
  s.edges = net.edge_count();
  if (s.nodes == 0) return s;
  s.min_degree = net.degree(0);
  for (std::size_t k = 0; k < net.size(); ++k) {
    const auto d = net.degree(k);
    s.min_degree = std::min(s.min_degree, d);
    s.max_degree = std::max(s.max_degree, d);
    s.isolated += d == 0;
  }
  s.mean_degree = 2.0 * static_cast<double>(s.edges) / static_cast<double>(s.nodes);
  return s;
}

}  // namespace gfilt
