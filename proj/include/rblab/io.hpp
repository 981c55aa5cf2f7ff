#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "rblab/gmm.hpp"

namespace rblab {

/// Shortest decimal that reads back to the same double.
std::string format_real(double v);

// Dataset CSV: header `x0,...,x{d-1},component,provenance`, LF endings.
// `component` is -1 for rows without a label.
void write_csv(std::ostream& out, const DatasetMatrix& data);
DatasetMatrix read_csv(std::istream& in, const std::string& source_name = "<stream>");
DatasetMatrix read_csv(const std::filesystem::path& path);

Provenance provenance_from_string(const std::string& s);

nlohmann::json to_json(const Gmm& g);
Gmm gmm_from_json(const nlohmann::json& j);
void save_gmm(const std::filesystem::path& path, const Gmm& g);
Gmm load_gmm(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames over `path`, so readers see
/// either the old file or the complete new one.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace rblab
