#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lpsl/error.hpp"
#include "lpsl/solver.hpp"

namespace lpsl {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_header(std::ostream& out, std::size_t n, const std::size_t* nnz, const SolverConfig& config,
                  const SolveMeta& meta, const json& run) {
  out << "#lpsl n=" << n;
  if (nnz) out << " nnz=" << *nnz;
  out << " lambda=" << fmt17(config.lambda) << " c=" << fmt17(config.c) << " beta=" << fmt17(config.beta) << '\n';
  out << "#config " << to_json(config).dump() << '\n';
  out << "#meta " << to_json(meta).dump() << '\n';
  if (!run.is_null()) out << "#run " << run.dump() << '\n';
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

SolveMeta meta_from_json(const json& doc) {
  SolveMeta m;
  m.mode = doc.value("mode", std::string());
  m.outer_rounds = doc.value("outer_rounds", std::size_t{0});
  m.inner_steps = doc.value("inner_steps", std::size_t{0});
  m.residual_inf = doc.value("residual_inf", 0.0);
  m.objective = doc.value("objective", 0.0);
  m.last_step = doc.value("last_step", 0.0);
  m.nnz = doc.value("nnz", std::size_t{0});
  m.stop_reason = doc.value("stop_reason", std::string());
  return m;
}

template <typename T>
T parse_field(std::string_view text, const std::string& where) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ValidationError(where + ": cannot parse '" + std::string(text) + "'");
  return value;
}

}  // namespace

void write_structure(const DenseStructure& b, const std::filesystem::path& path, const json& run) {
  auto out = open_output(path);
  const std::size_t n = b.n();
  write_header(out, n, nullptr, b.config, b.meta, run);
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    line.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j) line += ' ';
      line += fmt17(b.values(i, j));
    }
    out << line << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

void write_structure(const SparseStructure& b, const std::filesystem::path& path, const json& run) {
  auto out = open_output(path);
  const std::size_t nnz = b.entries.size();
  write_header(out, b.n, &nnz, b.config, b.meta, run);
  for (const auto& e : b.entries) out << e.row << ' ' << e.col << ' ' << fmt17(e.value) << '\n';
  if (!out) throw ValidationError("write failed: " + path.string());
}

std::variant<DenseStructure, SparseStructure> read_structure(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("#lpsl ", 0) != 0) {
    throw ValidationError(path.string() + ": missing '#lpsl' header");
  }
  std::map<std::string, std::string> header;
  {
    std::istringstream fields(line.substr(6));
    std::string tok;
    while (fields >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ValidationError(path.string() + ": bad header field '" + tok + "'");
      header[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  if (!header.count("n")) throw ValidationError(path.string() + ": header lacks n");
  const auto n = parse_field<std::size_t>(header["n"], path.string());
  SolverConfig config;
  SolveMeta meta;
  if (header.count("lambda")) config.lambda = parse_field<double>(header["lambda"], path.string());
  if (header.count("c")) config.c = parse_field<double>(header["c"], path.string());
  if (header.count("beta")) config.beta = parse_field<double>(header["beta"], path.string());

  std::size_t line_no = 1;
  std::vector<std::string> body;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      if (line.rfind("#config ", 0) == 0) {
        config = solver_config_from_json(json::parse(line.substr(8)), config);
        continue;
      }
      if (line.rfind("#meta ", 0) == 0) {
        meta = meta_from_json(json::parse(line.substr(6)));
        continue;
      }
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (line.empty() || line[0] == '#') continue;
    body.push_back(std::move(line));
  }

  auto tokens = [](const std::string& s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
      if (j > i) out.emplace_back(s.data() + i, j - i);
      i = j;
    }
    return out;
  };

  if (header.count("nnz")) {
    SparseStructure b;
    b.n = n;
    b.config = config;
    b.meta = meta;
    const auto nnz = parse_field<std::size_t>(header["nnz"], path.string());
    if (body.size() != nnz) {
      throw ValidationError(path.string() + ": header says nnz=" + std::to_string(nnz) + " but file has " +
                            std::to_string(body.size()) + " entries");
    }
    b.entries.reserve(nnz);
    for (const auto& row : body) {
      const auto f = tokens(row);
      if (f.size() != 3) throw ValidationError(path.string() + ": expected 'i j value'");
      const auto i = parse_field<long long>(f[0], path.string());
      const auto j = parse_field<long long>(f[1], path.string());
      const auto v = parse_field<double>(f[2], path.string());
      if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(j) >= n) {
        throw ValidationError(path.string() + ": entry index out of range");
      }
      if (!b.entries.empty()) {
        const auto& p = b.entries.back();
        if (j < p.col || (j == p.col && i <= p.row)) {
          throw ValidationError(path.string() + ": entries must be sorted by (j, i) without duplicates");
        }
      }
      b.entries.push_back({static_cast<Index>(i), static_cast<Index>(j), v});
    }
    b.meta.nnz = b.entries.size();
    return b;
  }

  DenseStructure b;
  b.config = config;
  b.meta = meta;
  if (body.size() != n) throw ValidationError(path.string() + ": dense structure needs " + std::to_string(n) + " rows");
  b.values = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = tokens(body[i]);
    if (f.size() != n) throw ValidationError(path.string() + ": row " + std::to_string(i) + " has wrong width");
    for (std::size_t j = 0; j < n; ++j) b.values(i, j) = parse_field<double>(f[j], path.string());
  }
  return b;
}

}  // namespace lpsl
