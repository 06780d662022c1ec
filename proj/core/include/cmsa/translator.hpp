#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>

#include "cmsa/error.hpp"

namespace cmsa::codeswitch {

/// Timeout, network failure or quota exhaustion. Retrying may succeed.
class TransientError : public Error {
 public:
  using Error::Error;
};

/// The service answered with something that is not a translation.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TranslatorClient {
 public:
  virtual ~TranslatorClient() = default;
  /// Throws TransientError or ProtocolError.
  virtual std::string translate(std::string_view word, std::string_view src,
                                std::string_view dst) = 0;
};

/// Persistent (word, src, dst) -> gloss map stored as a sorted TSV file.
/// Readers run concurrently; writers are serialized and every write
/// rewrites the file atomically (temp file + rename).
class TranslationCache {
 public:
  /// In-memory cache.
  TranslationCache() = default;
  /// Loads `path` if it exists; subsequent puts are written through.
  explicit TranslationCache(std::filesystem::path path);

  std::optional<std::string> get(std::string_view word, std::string_view src,
                                 std::string_view dst) const;
  void put(std::string_view word, std::string_view src, std::string_view dst,
           std::string gloss);
  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  void flush_locked() const;

  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mu_;
  std::map<Key, std::string, std::less<>> entries_;
};

/// Wraps a remote client: consults the cache first, writes every success
/// through, and caps the number of concurrent remote calls.
class CachingTranslator : public TranslatorClient {
 public:
  CachingTranslator(std::shared_ptr<TranslatorClient> remote,
                    std::shared_ptr<TranslationCache> cache,
                    std::ptrdiff_t max_in_flight = 4);

  std::string translate(std::string_view word, std::string_view src,
                        std::string_view dst) override;

  std::size_t remote_calls() const noexcept { return remote_calls_; }

 private:
  std::shared_ptr<TranslatorClient> remote_;
  std::shared_ptr<TranslationCache> cache_;
  std::counting_semaphore<64> in_flight_;
  std::atomic<std::size_t> remote_calls_{0};
};

/// Fixture-backed client for tests and offline runs.
class FixtureTranslator : public TranslatorClient {
 public:
  enum class Failure { None, Timeout, Malformed };
  using Table = std::map<std::string, std::string, std::less<>>;

  explicit FixtureTranslator(Table table,
                             Failure failure = Failure::None)
      : table_(std::move(table)), failure_(failure) {}

  std::string translate(std::string_view word, std::string_view src,
                        std::string_view dst) override;

  std::size_t calls() const noexcept { return calls_; }

 private:
  Table table_;
  Failure failure_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpTranslatorConfig {
  /// e.g. "https://translate.example.com/v1/translate"
  std::string endpoint;
  /// Name of the environment variable that holds the API key.
  std::string api_key_env = "CMSA_TRANSLATOR_API_KEY";
  std::chrono::milliseconds timeout{5000};
};

/// JSON-over-HTTP client. Request body {"text", "source", "target"};
/// the key is sent as "Authorization: Bearer <key>"; the response must be
/// an object with a non-empty string field "translation".
class HttpTranslator : public TranslatorClient {
 public:
  explicit HttpTranslator(HttpTranslatorConfig cfg);
  std::string translate(std::string_view word, std::string_view src,
                        std::string_view dst) override;

 private:
  HttpTranslatorConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace cmsa::codeswitch
