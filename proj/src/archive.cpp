#include "spext/archive.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "spext/errors.hpp"

namespace spext {
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(fmt::format("cannot parse number '{}'", s));
  return v;
}

int PosteriorArchive::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::out_of_range("no parameter named " + name);
}

Eigen::MatrixXd PosteriorArchive::chain_matrix(int parameter) const {
  Eigen::MatrixXd out(n_chains, draws_per_chain);
  for (int c = 0; c < n_chains; ++c)
    out.row(c) = draws.block(static_cast<Eigen::Index>(c) * draws_per_chain, parameter, draws_per_chain, 1).transpose();
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_archive(const PosteriorArchive& a, const fs::path& dir) {
  if (a.draws.rows() != static_cast<Eigen::Index>(a.n_chains) * a.draws_per_chain ||
      a.draws.cols() != static_cast<Eigen::Index>(a.names.size()))
    throw std::domain_error("archive draws do not match chain/parameter counts");
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  nlohmann::json manifest;
  manifest["format"] = "spext-posterior-archive";
  manifest["version"] = PosteriorArchive::kFormatVersion;
  manifest["n_chains"] = a.n_chains;
  manifest["draws_per_chain"] = a.draws_per_chain;
  manifest["seeds"] = a.seeds;
  manifest["config"] = a.config;
  manifest["metadata"] = a.metadata;
  manifest["blocks"] = a.block_names;
  auto& groups = manifest["groups"] = nlohmann::json::array();
  for (const auto& g : a.groups) {
    groups.push_back({{"name", g.name}, {"file", g.name + ".csv"}, {"first", g.first}, {"count", g.count}});
  }
  {
    std::ofstream out(tmp / "manifest.json");
    out << manifest.dump(2) << '\n';
  }

  for (const auto& g : a.groups) {
    std::ofstream out(tmp / (g.name + ".csv"));
    out << "chain,iteration";
    for (int j = 0; j < g.count; ++j) out << ',' << a.names[static_cast<std::size_t>(g.first + j)];
    out << '\n';
    for (int c = 0; c < a.n_chains; ++c) {
      for (int it = 0; it < a.draws_per_chain; ++it) {
        const Eigen::Index row = static_cast<Eigen::Index>(c) * a.draws_per_chain + it;
        out << c << ',' << it;
        for (int j = 0; j < g.count; ++j) out << ',' << format_double(a.draws(row, g.first + j));
        out << '\n';
      }
    }
  }
  {
    std::ofstream out(tmp / "acceptance.csv");
    out << "chain";
    for (const auto& b : a.block_names) out << ',' << b;
    out << '\n';
    for (Eigen::Index c = 0; c < a.acceptance.rows(); ++c) {
      out << c;
      for (Eigen::Index b = 0; b < a.acceptance.cols(); ++b) out << ',' << format_double(a.acceptance(c, b));
      out << '\n';
    }
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

PosteriorArchive read_archive(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("cannot open archive manifest in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.value("version", 0) != PosteriorArchive::kFormatVersion)
    throw DataError("unsupported archive version");
  PosteriorArchive a;
  a.n_chains = manifest.at("n_chains");
  a.draws_per_chain = manifest.at("draws_per_chain");
  a.seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
  a.config = manifest.at("config");
  a.metadata = manifest.at("metadata");
  a.block_names = manifest.at("blocks").get<std::vector<std::string>>();
  int total = 0;
  for (const auto& g : manifest.at("groups")) {
    a.groups.push_back({g.at("name"), g.at("first"), g.at("count")});
    total = std::max(total, a.groups.back().first + a.groups.back().count);
  }
  a.names.resize(static_cast<std::size_t>(total));
  a.draws.resize(static_cast<Eigen::Index>(a.n_chains) * a.draws_per_chain, total);
  for (const auto& g : a.groups) {
    std::ifstream table(dir / (g.name + ".csv"));
    if (!table) throw DataError("missing archive table " + g.name);
    std::string line;
    std::getline(table, line);
    const auto header = split_csv(line);
    if (static_cast<int>(header.size()) != g.count + 2) throw DataError("malformed archive header in " + g.name);
    for (int j = 0; j < g.count; ++j) a.names[static_cast<std::size_t>(g.first + j)] = header[static_cast<std::size_t>(j + 2)];
    Eigen::Index row = 0;
    while (std::getline(table, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (static_cast<int>(cells.size()) != g.count + 2 || row >= a.draws.rows())
        throw DataError("malformed archive row in " + g.name);
      for (int j = 0; j < g.count; ++j) a.draws(row, g.first + j) = parse_double(cells[static_cast<std::size_t>(j + 2)]);
      ++row;
    }
    if (row != a.draws.rows()) throw DataError("archive table " + g.name + " has the wrong number of rows");
  }
  std::ifstream acc(dir / "acceptance.csv");
  std::string line;
  std::getline(acc, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(acc, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    std::vector<double> r;
    for (std::size_t j = 1; j < cells.size(); ++j) r.push_back(parse_double(cells[j]));
    rows.push_back(std::move(r));
  }
  a.acceptance.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(a.block_names.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (std::size_t b = 0; b < rows[c].size() && b < a.block_names.size(); ++b)
      a.acceptance(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(b)) = rows[c][b];
  return a;
}

}  // namespace spext
