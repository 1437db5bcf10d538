// Regenerates tests/fixtures/replay: a three-item dataset, a response cache
// filled by a deterministic synthetic transport, and the MJD file that
// replaying that cache produces. Not run by ctest.
//
//   make_replay_fixture <fixture dir>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hlv/backend.hpp"
#include "hlv/cli.hpp"
#include "hlv/dataset.hpp"
#include "hlv/estimator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModel = "fixture-model";

// Letter scores derived from the prompt text: position-biased toward A plus a
// label preference, so debiasing has something to remove.
class SyntheticTransport : public hlv::Transport {
 public:
  std::string post(const std::string& body) override {
    const auto req = json::parse(body);
    const std::string prompt = req["messages"].back()["content"].get<std::string>();
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a, stable across platforms
    for (unsigned char c : prompt) h = (h ^ c) * 1099511628211ULL;
    static const std::array<const char*, 3> names = {"Entailment", "Neutral", "Contradiction"};
    json top = json::array();
    for (std::size_t i = 0; i < 3; ++i) {
      const char letter = static_cast<char>('A' + i);
      double weight = 1.0 + 0.5 * static_cast<double>(2 - i) + static_cast<double>((h >> (8 * i)) % 7) / 10.0;
      for (std::size_t l = 0; l < 3; ++l) {
        if (prompt.find(std::string(1, letter) + ". " + names[l]) != std::string::npos) weight *= 1.0 + l;
      }
      top.push_back({{"token", std::string(1, letter)}, {"logprob", -1.0 / weight}});
    }
    return json{{"choices",
                 {{{"index", 0},
                   {"logprobs", {{"content", {{{"token", top[0]["token"]}, {"logprob", top[0]["logprob"]},
                                               {"top_logprobs", top}}}}}}}}}}
        .dump();
  }
};

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_replay_fixture <fixture dir>\n";
    return 1;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir);
  const fs::path items = dir / "items.jsonl";
  const fs::path cache = dir / "cache.jsonl";
  write(items,
        "{\"id\":\"r1\",\"premise\":\"A woman is reading a book in a park.\",\"hypothesis\":\"A woman is outdoors.\","
        "\"distribution\":[0.8,0.2,0.0]}\n"
        "{\"id\":\"r2\",\"premise\":\"Two dogs chase a ball on the beach.\",\"hypothesis\":\"The dogs are asleep.\","
        "\"distribution\":[0.0,0.1,0.9]}\n"
        "{\"id\":\"r3\",\"premise\":\"A man plays guitar on a stage.\",\"hypothesis\":\"The man is famous.\","
        "\"distribution\":[0.1,0.8,0.1]}\n");
  fs::remove(cache);

  hlv::BackendConfig config;
  config.model = kModel;
  auto store = std::make_shared<hlv::ResponseCache>(cache);
  hlv::ChatCompletionBackend backend(config, std::make_shared<SyntheticTransport>(), store);
  const auto dataset = hlv::load_dataset(items, hlv::DatasetFormat::Canonical);
  hlv::estimate_dataset(hlv::estimation_inputs(dataset), hlv::EstimationConfig{}, backend, 1);

  const fs::path tmp = fs::temp_directory_path() / "hlv-replay-fixture";
  fs::remove_all(tmp);
  std::ostringstream out;
  std::ostringstream err;
  const int code = hlv::cli::run({"hlvest", "estimate", "--dataset", items.string(), "--backend", "replay",
                                  "--model", kModel, "--cache", cache.string(), "--out", tmp.string()},
                                 out, err);
  if (code != 0) {
    std::cerr << err.str();
    return code;
  }
  for (const auto& e : fs::directory_iterator(tmp)) {
    if (e.path().filename().string().rfind("mjd-", 0) == 0) fs::copy_file(e.path(), dir / "expected_mjd.jsonl",
                                                                            fs::copy_options::overwrite_existing);
  }
  fs::remove_all(tmp);
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}
