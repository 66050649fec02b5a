#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "advml/nn.hpp"
#include "advml/prng.hpp"
#include "advml/theft.hpp"

namespace advml {

/// Sliding-window limiter: at most max_requests per identity per window.
/// Updates are serialized, so concurrent connections account correctly.
class RateLimiter {
 public:
  RateLimiter(std::size_t max_requests, double time_window)
      : max_requests_(max_requests), time_window_(time_window) {}

  /// Drops timestamps older than the window, allows iff count < max,
  /// records the request when allowed.
  bool allow(const std::string& identity, double now);

  std::size_t max_requests() const { return max_requests_; }
  double time_window() const { return time_window_; }

 private:
  std::size_t max_requests_;
  double time_window_;
  std::unordered_map<std::string, std::deque<double>> hits_;
  std::mutex mu_;
};

struct ServeConfig {
  std::string token = "secure_token_123";
  std::optional<std::size_t> top_k;  // unset = full distribution
  double noise_factor = 0.05;
  std::size_t rate_max = 5;
  double rate_window = 60.0;
  std::string host = "127.0.0.1";
  int port = 8080;
};

enum class PredictStatus { Ok, Unauthorized, RateLimited, BadInput };

struct PredictResult {
  PredictStatus status = PredictStatus::Ok;
  std::vector<std::pair<int, double>> top;  // (class, prob), descending prob
};

/// Gate order: token, then limiter, then inference. With noise on, the
/// returned distribution is softmax(probabilities + gaussian noise), matching
/// the defended-serving recipe; noise 0 returns the exact probabilities.
PredictResult guarded_predict(const MlpModel& model, const std::vector<double>& features,
                              const ServeConfig& cfg, RateLimiter& limiter,
                              const std::string& token, const std::string& identity, double now,
                              Prng& rng);

/// HTTP endpoint: POST /predict {"token","features"} -> 200 {"top":[...]}
/// | 401 | 429 | 400; GET /healthz -> "ok". Identity is the source address.
class PredictServer {
 public:
  PredictServer(MlpModel model, ServeConfig cfg);
  ~PredictServer();

  PredictServer(const PredictServer&) = delete;
  PredictServer& operator=(const PredictServer&) = delete;

  /// Binds and serves on a background thread; throws if the port is taken.
  void start();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ClientPolicy {
  int retries = 3;                 // network failures only
  bool wait_on_rate_limit = true;  // otherwise the probe row is dropped
  double wait_seconds = 0.05;
  double max_wait_seconds = 120.0;
};

struct ExtractionReport {
  std::size_t queries_issued = 0;
  std::size_t rate_limited = 0;
  double agreement = 0.0;  // surrogate vs endpoint on the held-out probes
  MlpModel surrogate;
};

/// Oracle backed by the live endpoint, one request per row.
QueryOracle remote_oracle(const std::string& host, int port, const std::string& token,
                          std::size_t num_classes, const ClientPolicy& policy = {});

/// Drives query -> surrogate training against a live endpoint.
ExtractionReport extraction_client(const std::string& host, int port, const std::string& token,
                                   const Matrix& probes, const Matrix& heldout,
                                   const std::vector<std::size_t>& surrogate_arch,
                                   int num_classes, const TrainConfig& cfg,
                                   const ClientPolicy& policy = {});

}  // namespace advml
