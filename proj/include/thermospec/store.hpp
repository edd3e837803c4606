#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "thermospec/measures.hpp"

namespace thermospec {

// Content-addressed result store: certificates under certs/<id>.json, result
// tables and plots at the top level, and a manifest binding them to the
// config hash.  Timestamps are recorded only when THERMOSPEC_TIMESTAMPS=1;
// the default keeps repeated runs byte-identical.
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  // Returns the certificate id (content hash).
  std::string put_certificate(const Certificate& cert);
  CertPtr get_certificate(const std::string& id) const;

  void put_file(const std::string& name, const std::string& content);
  void write_manifest(const std::string& config_json);

  // Re-checks every stored certificate against its own claimed data:
  // stochastic rows, stationarity, entropy recomputation, dimension
  // consistency, affine mixture identities, and the manifest hash.
  std::vector<std::string> verify() const;

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;  // relative paths, insertion order
};

std::uint64_t fnv1a(const std::string& s);

// Deterministic CSV: rows of preformatted cells.
std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);
std::string format_double(double v);

// Minimal polyline SVG of (x, y) points, no external assets.
std::string svg_polyline(const std::vector<std::pair<double, double>>& points,
                         const std::string& x_label, const std::string& y_label);

}  // namespace thermospec
