#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace advml {

/// Long-form metrics buffer. One metric per row, fixed header
/// `run_id,scenario,seed,step,split,metric,value`; values are written with
/// shortest round-trip formatting so reruns are byte-identical.
class MetricsWriter {
 public:
  MetricsWriter(std::string run_id, std::string scenario, std::uint64_t seed);

  void add(std::size_t step, const std::string& split, const std::string& metric, double value);
  void write_csv(const std::string& path) const;
  std::string to_csv() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  struct Row {
    std::size_t step;
    std::string split;
    std::string metric;
    double value;
  };
  std::string run_id_;
  std::string scenario_;
  std::uint64_t seed_;
  std::vector<Row> rows_;
};

/// Shortest decimal that round-trips the double (to_chars).
std::string format_double(double value);

struct RunManifest {
  std::string run_id;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string config_json;     // snapshot of the scenario config
  std::string dataset_digest;  // sha256 of the input data, when any
  std::string started_at;      // ISO-8601 UTC
  std::string finished_at;
  std::vector<std::string> artifacts;

  std::string to_json() const;
  void write(const std::string& path) const;
};

std::string iso8601_utc_now();

}  // namespace advml
