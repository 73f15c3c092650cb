#include "margint/path_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "margint/errors.hpp"

namespace margint {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary path format assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("binary path: truncated header");
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw DataError("path CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_path_csv(std::ostream& out, const SamplePath& path, const std::string& config_hash) {
  path.check_consistency();
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\r\n";
  out << "# delta=";
  num(path.delta);
  out << " horizon=";
  num(path.horizon);
  out << " seed=" << path.seed << "\r\n";
  out << 't';
  for (std::size_t l = 0; l < path.dim; ++l) out << ",x_" << (l + 1);
  out << ",y\r\n";
  for (std::size_t i = 0; i < path.size(); ++i) {
    num(path.times[i]);
    for (double v : path.row(i)) {
      out << ',';
      num(v);
    }
    out << ',';
    num(path.y[i]);
    out << "\r\n";
  }
}

SamplePath read_path_csv(std::istream& in) {
  SamplePath path;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream meta(line.substr(1));
      for (std::string tok; meta >> tok;) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        if (key == "delta") path.delta = parse_number(val, line_no), have_meta = true;
        if (key == "horizon") path.horizon = parse_number(val, line_no);
        if (key == "seed") path.seed = std::stoull(val);
      }
      continue;
    }
    const auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields.size() < 3 || fields.front() != "t" || fields.back() != "y")
        throw DataError("path CSV: header must be t,x_1..x_d,y");
      path.dim = fields.size() - 2;
      have_header = true;
      continue;
    }
    if (fields.size() != path.dim + 2)
      throw DataError("path CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(path.dim + 2) + " fields");
    path.times.push_back(parse_number(fields.front(), line_no));
    for (std::size_t l = 0; l < path.dim; ++l) path.x.push_back(parse_number(fields[l + 1], line_no));
    path.y.push_back(parse_number(fields.back(), line_no));
  }
  if (!have_header) throw DataError("path CSV: missing header");
  if (path.y.empty()) throw DataError("path CSV: no data rows");
  if (!have_meta) {
    if (path.size() < 2) throw DataError("path CSV: cannot infer delta from a single row");
    path.delta = path.times[1] - path.times[0];
    path.horizon = path.times.back();
  }
  path.check_consistency();
  return path;
}

void write_path_binary(std::ostream& out, const SamplePath& path) {
  path.check_consistency();
  put<std::uint64_t>(out, path.dim);
  put<double>(out, path.delta);
  put<double>(out, path.horizon);
  put<std::uint64_t>(out, path.seed);
  for (std::size_t i = 0; i < path.size(); ++i) {
    put<double>(out, path.times[i]);
    for (double v : path.row(i)) put<double>(out, v);
    put<double>(out, path.y[i]);
  }
}

SamplePath read_path_binary(std::istream& in) {
  SamplePath path;
  const auto dim = get<std::uint64_t>(in);
  if (dim == 0 || dim > 1024) throw DataError("binary path: implausible dimension " + std::to_string(dim));
  path.dim = static_cast<std::size_t>(dim);
  path.delta = get<double>(in);
  path.horizon = get<double>(in);
  path.seed = get<std::uint64_t>(in);
  const std::size_t width = path.dim + 2;
  std::vector<double> row(width);
  while (in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(width * sizeof(double)))) {
    path.times.push_back(row.front());
    path.x.insert(path.x.end(), row.begin() + 1, row.end() - 1);
    path.y.push_back(row.back());
  }
  if (in.gcount() != 0) throw DataError("binary path: trailing partial row");
  if (path.y.empty()) throw DataError("binary path: no data rows");
  return path;
}

void save_path(const std::filesystem::path& file, const SamplePath& path,
               const std::string& config_hash) {
  const bool binary = file.extension() == ".bin";
  std::ofstream out(file, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot open '" + file.string() + "' for writing");
  if (binary)
    write_path_binary(out, path);
  else
    write_path_csv(out, path, config_hash);
  if (!out) throw DataError("failed writing '" + file.string() + "'");
}

SamplePath load_path(const std::filesystem::path& file) {
  const bool binary = file.extension() == ".bin";
  std::ifstream in(file, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot open path file '" + file.string() + "'");
  return binary ? read_path_binary(in) : read_path_csv(in);
}

}  // namespace margint
