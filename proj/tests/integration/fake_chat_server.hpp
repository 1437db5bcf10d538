#pragma once

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>
#include <vector>

namespace hlv::testing {

// Local chat-completions endpoint that answers label-faithfully: the
// log-probability of a letter depends only on the label printed next to it.
class FakeChatServer {
 public:
  FakeChatServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        auth_headers.push_back(req.get_header_value("Authorization"));
      }
      const int n = ++requests;
      if (n <= fail_first.load()) {
        res.status = failure_status.load();
        res.set_content("{\"error\":{\"message\":\"try later\"}}", "application/json");
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      const std::string prompt = body["messages"].back()["content"].get<std::string>();
      res.set_content(answer(prompt, body.value("top_logprobs", 20)), "application/json");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeChatServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }

  std::vector<std::string> auth() {
    std::lock_guard lock(mutex_);
    return auth_headers;
  }

  // Probabilities per label, in E, N, C order.
  static constexpr std::array<double, 3> kLabelProbs = {0.6, 0.3, 0.1};

  int port = 0;
  std::atomic<int> requests{0};
  std::atomic<int> fail_first{0};
  std::atomic<int> failure_status{503};

 private:
  static std::string answer(const std::string& prompt, int top) {
    static const std::array<const char*, 3> names = {"Entailment", "Neutral", "Contradiction"};
    nlohmann::json entries = nlohmann::json::array();
    for (char letter : {'A', 'B', 'C'}) {
      for (std::size_t l = 0; l < 3; ++l) {
        if (prompt.find(std::string(1, letter) + ". " + names[l]) != std::string::npos) {
          entries.push_back({{"token", std::string(1, letter)}, {"logprob", std::log(kLabelProbs[l])}});
        }
      }
    }
    entries.push_back({{"token", "The"}, {"logprob", -9.0}});
    while (static_cast<int>(entries.size()) > top) entries.erase(entries.end() - 1);
    return nlohmann::json{{"choices",
                           {{{"index", 0},
                             {"message", {{"role", "assistant"}, {"content", entries[0]["token"]}}},
                             {"logprobs", {{"content", {{{"token", entries[0]["token"]},
                                                         {"logprob", entries[0]["logprob"]},
                                                         {"top_logprobs", entries}}}}}}}}}}
        .dump();
  }

  httplib::Server server_;
  std::thread thread_;
  std::mutex mutex_;
  std::vector<std::string> auth_headers;
};

}  // namespace hlv::testing
