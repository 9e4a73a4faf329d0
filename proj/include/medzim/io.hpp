#pragma once

// Reading relative-abundance and metadata files, and writing the tabular
// outputs of a run.

#include "medzim/screen.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace medzim {

/// Input problem with its location; line and column are 1-based, 0 when
/// the error concerns the whole file.
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& file, std::size_t line, std::size_t column,
              const std::string& what);
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

struct IngestResult {
  TaxaTable table;
  std::vector<std::string> warnings;
};

/// RA file: header row, first column sample ID, one column per taxon.
/// Metadata file: header with sample_id, library_size, x, y in any order.
/// Tab- or comma-separated, detected from the header row. Samples are kept
/// in RA-file order; those missing from either file are dropped with a warning.
IngestResult ingest(const std::filesystem::path& ra_path, const std::filesystem::path& meta_path);

/// One positive number per line; blank lines and lines starting with '#'
/// are skipped.
std::vector<double> read_library_pool(const std::filesystem::path& path);

/// Writes the table as an RA file and a metadata file that ingest reads
/// back to identical values.
void write_table(const TaxaTable& table, const std::filesystem::path& ra_path,
                 const std::filesystem::path& meta_path);

/// Header of results.tsv for the given CDE setting.
std::vector<std::string> results_columns(bool with_cde);

void write_results_tsv(std::ostream& os, const ScreenResult& result, bool with_cde);

/// Taxa as rows, samples as columns; "NA" where the taxon is absent.
void write_heatmap_tsv(std::ostream& os, const ScreenResult& result, const TaxaTable& table);

/// Writes `content` to `path` through a temporary file and a rename, so a
/// failed run never leaves a truncated output behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace medzim
