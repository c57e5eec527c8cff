#pragma once

// Stored logits keyed by exact context, read from JSON lines:
//   {"vocab_size": N}
//   {"context": [ids], "logits": [reals]}
//   ...

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slab/dist.hpp"
#include "slab/error.hpp"
#include "slab/lm/model.hpp"

namespace slab::lm {

class LogitsReplay final : public LanguageModel {
 public:
  explicit LogitsReplay(std::size_t vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size == 0) fail(Errc::ConfigError, "replay vocab_size must be positive");
  }

  void add(std::vector<TokenId> context, std::vector<double> logits) {
    if (logits.size() != vocab_size_) {
      fail(Errc::LengthMismatch, "logits length " + std::to_string(logits.size()) +
                                     " differs from vocab_size " + std::to_string(vocab_size_));
    }
    for (TokenId id : context) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
        fail(Errc::InvalidArgument, "replay context token outside vocabulary");
      }
    }
    if (!records_.emplace(std::move(context), std::move(logits)).second) {
      fail(Errc::ConfigError, "duplicate replay context");
    }
  }

  static LogitsReplay parse(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_record = [&]() -> std::optional<nlohmann::json> {
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          return nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
          fail(Errc::ConfigError, "replay line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      return std::nullopt;
    };
    auto header = next_record();
    if (!header || !header->contains("vocab_size")) {
      fail(Errc::ConfigError, "replay must start with a {\"vocab_size\": N} record");
    }
    LogitsReplay replay((*header)["vocab_size"].get<std::size_t>());
    while (auto rec = next_record()) {
      try {
        replay.add(rec->at("context").get<std::vector<TokenId>>(),
                   rec->at("logits").get<std::vector<double>>());
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::ConfigError, "replay line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return replay;
  }

  static LogitsReplay load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open replay " + path);
    return parse(in);
  }

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t num_records() const noexcept { return records_.size(); }

  SortedDistribution next_distribution(std::span<const TokenId> context) const override {
    auto it = records_.find(std::vector<TokenId>(context.begin(), context.end()));
    if (it == records_.end()) fail(Errc::ReplayMiss, "context not present in replay");
    return from_logits(it->second);
  }

 private:
  std::size_t vocab_size_;
  std::map<std::vector<TokenId>, std::vector<double>> records_;
};

}  // namespace slab::lm
