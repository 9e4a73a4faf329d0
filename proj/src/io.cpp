#include "medzim/io.hpp"

#include "medzim/format.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace medzim {

namespace {

struct Row {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

struct DelimitedFile {
  std::string name;
  std::vector<std::string> header;
  std::vector<Row> rows;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

DelimitedFile read_delimited(const std::filesystem::path& path) {
  DelimitedFile f;
  f.name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(f.name, 0, 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  char delim = '\t';
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (!have_header) {
      delim = line.find('\t') != std::string::npos ? '\t' : ',';
      f.header = split(line, delim);
      have_header = true;
      continue;
    }
    Row row{line_no, split(line, delim)};
    if (row.cells.size() != f.header.size()) {
      throw IngestError(f.name, line_no, 0,
                        "expected " + std::to_string(f.header.size()) + " fields, found " +
                            std::to_string(row.cells.size()));
    }
    f.rows.push_back(std::move(row));
  }
  if (!have_header) throw IngestError(f.name, 0, 0, "file is empty; a header row is required");
  return f;
}

double parse_number(const DelimitedFile& f, const Row& row, std::size_t col) {
  const std::string& cell = row.cells[col];
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw IngestError(f.name, row.line, col + 1, "malformed numeric cell '" + cell + "'");
  }
  return v;
}

struct MetaRow {
  double library_size;
  double x;
  double y;
};

}  // namespace

IngestError::IngestError(const std::string& file, std::size_t line, std::size_t column,
                         const std::string& what)
    : std::runtime_error([&] {
        std::string where = file;
        if (line > 0) where += ":" + std::to_string(line);
        if (column > 0) where += ":" + std::to_string(column);
        return where + ": " + what;
      }()),
      file_(file),
      line_(line),
      column_(column) {}

IngestResult ingest(const std::filesystem::path& ra_path, const std::filesystem::path& meta_path) {
  const DelimitedFile ra = read_delimited(ra_path);
  const DelimitedFile meta = read_delimited(meta_path);
  if (ra.header.size() < 2) {
    throw IngestError(ra.name, 1, 0, "expected a sample ID column followed by at least one taxon");
  }

  std::map<std::string, std::size_t> meta_cols;
  for (std::size_t c = 0; c < meta.header.size(); ++c) meta_cols[meta.header[c]] = c;
  for (const char* required : {"sample_id", "library_size", "x", "y"}) {
    if (!meta_cols.count(required)) {
      throw IngestError(meta.name, 1, 0, std::string("missing required column '") + required + "'");
    }
  }
  const std::size_t c_id = meta_cols["sample_id"];
  const std::size_t c_lib = meta_cols["library_size"];
  const std::size_t c_x = meta_cols["x"];
  const std::size_t c_y = meta_cols["y"];

  std::map<std::string, MetaRow> meta_by_id;
  for (const Row& row : meta.rows) {
    const std::string& id = row.cells[c_id];
    if (id.empty()) throw IngestError(meta.name, row.line, c_id + 1, "empty sample ID");
    MetaRow m{parse_number(meta, row, c_lib), parse_number(meta, row, c_x),
              parse_number(meta, row, c_y)};
    if (!(m.library_size >= 1.0)) {
      throw IngestError(meta.name, row.line, c_lib + 1, "library size must be at least 1");
    }
    if (!meta_by_id.emplace(id, m).second) {
      throw IngestError(meta.name, row.line, c_id + 1, "duplicate sample ID '" + id + "'");
    }
  }

  IngestResult out;
  TaxaTable& t = out.table;
  t.taxa_names.assign(ra.header.begin() + 1, ra.header.end());
  std::map<std::string, bool> seen;
  std::vector<std::vector<double>> values;
  for (const Row& row : ra.rows) {
    const std::string& id = row.cells[0];
    if (id.empty()) throw IngestError(ra.name, row.line, 1, "empty sample ID");
    if (!seen.emplace(id, true).second) {
      throw IngestError(ra.name, row.line, 1, "duplicate sample ID '" + id + "'");
    }
    std::vector<double> v(t.taxa_names.size());
    for (std::size_t c = 1; c < row.cells.size(); ++c) {
      const double a = parse_number(ra, row, c);
      if (!(a >= 0.0 && a <= 1.0)) {
        throw IngestError(ra.name, row.line, c + 1, "relative abundance '" + row.cells[c] +
                                                        "' outside [0, 1]");
      }
      v[c - 1] = a;
    }
    const auto it = meta_by_id.find(id);
    if (it == meta_by_id.end()) {
      out.warnings.push_back("sample '" + id + "' has no metadata; dropped");
      continue;
    }
    t.sample_ids.push_back(id);
    t.library_size.push_back(it->second.library_size);
    t.x.push_back(it->second.x);
    t.y.push_back(it->second.y);
    values.push_back(std::move(v));
  }
  for (const Row& row : meta.rows) {
    if (!seen.count(row.cells[c_id])) {
      out.warnings.push_back("sample '" + row.cells[c_id] + "' has no abundance row; dropped");
    }
  }
  if (values.empty()) {
    throw IngestError(ra.name, 0, 0, "no sample appears in both files");
  }

  t.ra.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(t.taxa_names.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < values[i].size(); ++j) {
      t.ra(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
    }
  }
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw IngestError(ra.name, 0, 0, e.what());
  }
  return out;
}

std::vector<double> read_library_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  const std::string name = path.string();
  if (!in) throw IngestError(name, 0, 0, "cannot open file");
  std::vector<double> pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string cell = trim(line);
    if (cell.empty() || cell[0] == '#') continue;
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !(v >= 1.0) ||
        !std::isfinite(v)) {
      throw IngestError(name, line_no, 1, "library size must be a number of at least 1");
    }
    pool.push_back(v);
  }
  if (pool.empty()) throw IngestError(name, 0, 0, "no library sizes found");
  return pool;
}

void write_table(const TaxaTable& table, const std::filesystem::path& ra_path,
                 const std::filesystem::path& meta_path) {
  table.validate();
  std::ostringstream ra;
  ra << "sample_id";
  for (const auto& name : table.taxa_names) ra << '\t' << name;
  ra << '\n';
  std::ostringstream meta;
  meta << "sample_id\tlibrary_size\tx\ty\n";
  for (std::size_t i = 0; i < table.n_samples(); ++i) {
    ra << table.sample_ids[i];
    for (std::size_t j = 0; j < table.n_taxa(); ++j) {
      ra << '\t' << format_exact(table.ra(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    ra << '\n';
    meta << table.sample_ids[i] << '\t' << format_exact(table.library_size[i]) << '\t'
         << format_exact(table.x[i]) << '\t' << format_exact(table.y[i]) << '\n';
  }
  write_file_atomic(ra_path, ra.str());
  write_file_atomic(meta_path, meta.str());
}

std::vector<std::string> results_columns(bool with_cde) {
  std::vector<std::string> cols = {"taxon", "status", "n_positive", "n_zero"};
  auto add = [&](const std::string& effect, bool with_q) {
    for (const char* suffix : {"", "_se", "_lo", "_hi", "_p"}) cols.push_back(effect + suffix);
    if (with_q) cols.push_back(effect + "_q");
  };
  add("NIE1", true);
  add("NIE2", true);
  add("NIE", false);
  add("NDE", false);
  if (with_cde) add("CDE", false);
  for (const char* c : {"significant_NIE1", "significant_NIE2", "converged"}) cols.push_back(c);
  return cols;
}

void write_results_tsv(std::ostream& os, const ScreenResult& result, bool with_cde) {
  const auto cols = results_columns(with_cde);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "\t" : "") << cols[i];
  os << '\n';
  auto status_name = [](TaxonStatus s) {
    switch (s) {
      case TaxonStatus::Fitted: return "fitted";
      case TaxonStatus::FitFailed: return "fit_failed";
      case TaxonStatus::NotEstimable: return "not_estimable";
    }
    return "unknown";
  };
  for (const auto& t : result.taxa) {
    os << t.name << '\t' << status_name(t.status) << '\t' << t.n_positive << '\t' << t.n_zero;
    const bool fitted = t.status == TaxonStatus::Fitted;
    auto put = [&](Effect e, const std::optional<double>* q) {
      const auto& inf = t.effects[e];
      const bool has_estimate = fitted && !(e == Effect::Nie2 && !t.zero_inflated);
      const double na = std::nan("");
      os << '\t' << format_number(has_estimate ? inf.estimate : na);
      for (double v : {inf.se, inf.lo, inf.hi, inf.p_value}) {
        os << '\t' << format_number(fitted && inf.available ? v : na);
      }
      if (q) os << '\t' << format_number(*q);
    };
    put(Effect::Nie1, &t.q_nie1);
    put(Effect::Nie2, &t.q_nie2);
    put(Effect::Nie, nullptr);
    put(Effect::Nde, nullptr);
    if (with_cde) put(Effect::Cde, nullptr);
    os << '\t' << (t.significant_nie1 ? 1 : 0) << '\t' << (t.significant_nie2 ? 1 : 0) << '\t'
       << (t.converged ? 1 : 0) << '\n';
  }
}

void write_heatmap_tsv(std::ostream& os, const ScreenResult& result, const TaxaTable& table) {
  const auto matrix = heatmap_matrix(result, table);
  os << "taxon";
  for (const auto& id : table.sample_ids) os << '\t' << id;
  os << '\n';
  for (std::size_t t = 0; t < matrix.size(); ++t) {
    os << table.taxa_names[t];
    for (const auto& cell : matrix[t]) os << '\t' << format_number(cell);
    os << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move output into place: " + path.string());
  }
}

}  // namespace medzim
