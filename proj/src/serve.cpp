#include "advml/serve.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace advml {

bool RateLimiter::allow(const std::string& identity, double now) {
  std::lock_guard<std::mutex> lock(mu_);
  std::deque<double>& q = hits_[identity];
  while (!q.empty() && now - q.front() >= time_window_) q.pop_front();
  if (q.size() < max_requests_) {
    q.push_back(now);
    return true;
  }
  return false;
}

PredictResult guarded_predict(const MlpModel& model, const std::vector<double>& features,
                              const ServeConfig& cfg, RateLimiter& limiter,
                              const std::string& token, const std::string& identity, double now,
                              Prng& rng) {
  PredictResult result;
  if (token != cfg.token) {
    result.status = PredictStatus::Unauthorized;  // limiter is not charged
    return result;
  }
  if (!limiter.allow(identity, now)) {
    result.status = PredictStatus::RateLimited;
    return result;
  }
  if (features.size() != model.input_dim()) {
    result.status = PredictStatus::BadInput;
    return result;
  }

  Matrix x(1, features.size());
  x.data() = features;
  Matrix probs = softmax_rows(forward(model, x));
  if (cfg.noise_factor > 0.0) {
    for (double& v : probs.data()) v += rng.gaussian(0.0, cfg.noise_factor);
    probs = softmax_rows(probs);  // re-normalize the noisy values
  }

  const std::size_t k = probs.cols();
  std::vector<std::pair<int, double>> entries;
  entries.reserve(k);
  for (std::size_t c = 0; c < k; ++c) entries.emplace_back(static_cast<int>(c), probs(0, c));
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;  // ties by class index
  });
  if (cfg.top_k && *cfg.top_k < entries.size()) entries.resize(*cfg.top_k);
  result.top = std::move(entries);
  return result;
}

struct PredictServer::Impl {
  MlpModel model;
  ServeConfig cfg;
  RateLimiter limiter;
  Prng rng;
  std::mutex rng_mu;
  httplib::Server server;
  std::thread worker;
  int bound_port = 0;

  Impl(MlpModel m, ServeConfig c)
      : model(std::move(m)),
        cfg(std::move(c)),
        limiter(cfg.rate_max, cfg.rate_window),
        rng(Prng(0x5e4e).child("serve")) {}

  double now_seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
};

PredictServer::PredictServer(MlpModel model, ServeConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(model), std::move(cfg))) {}

PredictServer::~PredictServer() { stop(); }

void PredictServer::start() {
  Impl& s = *impl_;
  s.server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  s.server.Post("/predict", [&s](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    std::string token;
    std::vector<double> features;
    bool parsed = false;
    if (!body.is_discarded() && body.is_object() && body.contains("token") &&
        body.contains("features") && body["token"].is_string() && body["features"].is_array()) {
      token = body["token"].get<std::string>();
      parsed = true;
      for (const auto& v : body["features"]) {
        if (!v.is_number()) {
          parsed = false;
          break;
        }
        features.push_back(v.get<double>());
      }
    }
    if (!parsed) {
      // auth still comes first when the token itself is readable
      if (!body.is_discarded() && body.is_object() && body.contains("token") &&
          body["token"].is_string() && body["token"].get<std::string>() != s.cfg.token) {
        res.status = 401;
        res.set_content(R"({"error":"unauthorized"})", "application/json");
        return;
      }
      res.status = 400;
      res.set_content(R"({"error":"bad_input"})", "application/json");
      return;
    }

    PredictResult out;
    {
      std::lock_guard<std::mutex> lock(s.rng_mu);
      out = guarded_predict(s.model, features, s.cfg, s.limiter, token, req.remote_addr,
                            s.now_seconds(), s.rng);
    }
    switch (out.status) {
      case PredictStatus::Unauthorized:
        res.status = 401;
        res.set_content(R"({"error":"unauthorized"})", "application/json");
        return;
      case PredictStatus::RateLimited:
        res.status = 429;
        res.set_content(R"({"error":"rate_limited"})", "application/json");
        return;
      case PredictStatus::BadInput:
        res.status = 400;
        res.set_content(R"({"error":"bad_input"})", "application/json");
        return;
      case PredictStatus::Ok:
        break;
    }
    nlohmann::json doc;
    doc["top"] = nlohmann::json::array();
    for (const auto& [cls, prob] : out.top)
      doc["top"].push_back({{"class", cls}, {"prob", prob}});
    res.set_content(doc.dump(), "application/json");
  });

  if (s.cfg.port == 0) {
    s.bound_port = s.server.bind_to_any_port(s.cfg.host);
    if (s.bound_port <= 0) throw std::runtime_error("serve: cannot bind a port");
  } else {
    if (!s.server.bind_to_port(s.cfg.host, s.cfg.port))
      throw std::runtime_error("serve: cannot bind port " + std::to_string(s.cfg.port));
    s.bound_port = s.cfg.port;
  }
  s.worker = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
}

void PredictServer::stop() {
  if (impl_ && impl_->worker.joinable()) {
    impl_->server.stop();
    impl_->worker.join();
  }
}

int PredictServer::port() const { return impl_->bound_port; }

namespace {

/// One POST /predict for a single feature row; retries network failures.
/// Returns the parsed top list, or nullopt when the row was rate-limited away.
std::optional<std::vector<std::pair<int, double>>> query_row(
    httplib::Client& client, const std::string& token, const Matrix& row,
    const ClientPolicy& policy, std::size_t& queries, std::size_t& limited) {
  nlohmann::json body;
  body["token"] = token;
  body["features"] = row.data();
  const std::string payload = body.dump();

  double waited = 0.0;
  int network_failures = 0;
  while (true) {
    httplib::Result res = client.Post("/predict", payload, "application/json");
    if (!res) {
      if (++network_failures > policy.retries)
        throw std::runtime_error("extraction_client: network failure after retries");
      continue;
    }
    ++queries;
    if (res->status == 429) {
      ++limited;
      if (!policy.wait_on_rate_limit || waited >= policy.max_wait_seconds) return std::nullopt;
      std::this_thread::sleep_for(std::chrono::duration<double>(policy.wait_seconds));
      waited += policy.wait_seconds;
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("extraction_client: endpoint returned status " +
                               std::to_string(res->status));
    nlohmann::json doc = nlohmann::json::parse(res->body);
    std::vector<std::pair<int, double>> top;
    for (const auto& entry : doc.at("top"))
      top.emplace_back(entry.at("class").get<int>(), entry.at("prob").get<double>());
    return top;
  }
}

}  // namespace

QueryOracle remote_oracle(const std::string& host, int port, const std::string& token,
                          std::size_t num_classes, const ClientPolicy& policy) {
  auto client = std::make_shared<httplib::Client>(host, port);
  client->set_keep_alive(true);
  return QueryOracle([client, token, num_classes, policy](const Matrix& x) {
    Matrix out(x.rows(), num_classes, 0.0);
    std::size_t queries = 0, limited = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto top = query_row(*client, token, x.row(r), policy, queries, limited);
      if (!top) throw std::runtime_error("remote_oracle: rate limited past the wait budget");
      for (const auto& [cls, prob] : *top)
        if (cls >= 0 && static_cast<std::size_t>(cls) < num_classes) out(r, cls) = prob;
    }
    return out;
  });
}

ExtractionReport extraction_client(const std::string& host, int port, const std::string& token,
                                   const Matrix& probes, const Matrix& heldout,
                                   const std::vector<std::size_t>& surrogate_arch,
                                   int num_classes, const TrainConfig& cfg,
                                   const ClientPolicy& policy) {
  httplib::Client client(host, port);
  client.set_keep_alive(true);

  ExtractionReport report;
  std::vector<std::size_t> answered;
  std::vector<int> labels;
  for (std::size_t r = 0; r < probes.rows(); ++r) {
    const auto top = query_row(client, token, probes.row(r), policy, report.queries_issued,
                               report.rate_limited);
    if (!top) continue;  // dropped by the limiter
    answered.push_back(r);
    labels.push_back(top->front().first);  // sorted descending, ties to low class
  }
  if (answered.empty()) throw std::runtime_error("extraction_client: no probes were answered");

  report.surrogate = train_surrogate(surrogate_arch, ActivationKind::Relu,
                                     take_rows(probes, answered), labels, num_classes, cfg);

  // score fidelity on held-out probes against the endpoint's own answers
  std::vector<int> endpoint_pred;
  for (std::size_t r = 0; r < heldout.rows(); ++r) {
    const auto top = query_row(client, token, heldout.row(r), policy, report.queries_issued,
                               report.rate_limited);
    endpoint_pred.push_back(top ? top->front().first : -1);
  }
  const std::vector<int> surrogate_pred = argmax_rows(forward(report.surrogate, heldout));
  std::size_t same = 0, scored = 0;
  for (std::size_t r = 0; r < heldout.rows(); ++r) {
    if (endpoint_pred[r] < 0) continue;
    ++scored;
    if (endpoint_pred[r] == surrogate_pred[r]) ++same;
  }
  report.agreement = scored ? static_cast<double>(same) / static_cast<double>(scored) : 0.0;
  return report;
}

}  // namespace advml
