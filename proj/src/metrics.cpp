#include "advml/metrics.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace advml {

std::string format_double(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

MetricsWriter::MetricsWriter(std::string run_id, std::string scenario, std::uint64_t seed)
    : run_id_(std::move(run_id)), scenario_(std::move(scenario)), seed_(seed) {}

void MetricsWriter::add(std::size_t step, const std::string& split, const std::string& metric,
                        double value) {
  rows_.push_back(Row{step, split, metric, value});
}

std::string MetricsWriter::to_csv() const {
  std::string out = "run_id,scenario,seed,step,split,metric,value\n";
  for (const Row& row : rows_) {
    out += run_id_;
    out += ',';
    out += scenario_;
    out += ',';
    out += std::to_string(seed_);
    out += ',';
    out += std::to_string(row.step);
    out += ',';
    out += row.split;
    out += ',';
    out += row.metric;
    out += ',';
    out += format_double(row.value);
    out += '\n';
  }
  return out;
}

void MetricsWriter::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_csv();
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string iso8601_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::json doc;
  doc["run_id"] = run_id;
  doc["scenario"] = scenario;
  doc["seed"] = seed;
  doc["config"] = config_json.empty() ? nlohmann::json(nullptr)
                                      : nlohmann::json::parse(config_json);
  doc["dataset_digest"] = dataset_digest;
  doc["started_at"] = started_at;
  doc["finished_at"] = finished_at;
  doc["artifacts"] = artifacts;
  return doc.dump(2);
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json() << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace advml
