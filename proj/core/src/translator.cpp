#include "cmsa/translator.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "io_util.hpp"
#include "json.hpp"

namespace cmsa::codeswitch {

namespace {

std::string sanitize_field(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace

TranslationCache::TranslationCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(*path_)) return;
  auto in = detail::open_input(*path_, std::ios::in | std::ios::binary);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = detail::strip_cr(raw);
    if (text.empty()) continue;
    const auto f = detail::split(text, '\t');
    if (f.size() != 4 || f[0].empty() || f[3].empty()) {
      throw DataError("expected \"word<TAB>src<TAB>dst<TAB>gloss\"", line);
    }
    entries_[Key{std::string(f[0]), std::string(f[1]), std::string(f[2])}] = std::string(f[3]);
  }
}

std::optional<std::string> TranslationCache::get(std::string_view word, std::string_view src,
                                                 std::string_view dst) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(Key{std::string(word), std::string(src), std::string(dst)});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TranslationCache::put(std::string_view word, std::string_view src, std::string_view dst,
                           std::string gloss) {
  std::unique_lock lock(mu_);
  entries_[Key{sanitize_field(word), sanitize_field(src), sanitize_field(dst)}] =
      sanitize_field(gloss);
  flush_locked();
}

std::size_t TranslationCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

void TranslationCache::flush_locked() const {
  if (!path_) return;
  std::ostringstream out;
  for (const auto& [key, gloss] : entries_) {
    out << std::get<0>(key) << '\t' << std::get<1>(key) << '\t' << std::get<2>(key) << '\t'
        << gloss << '\n';
  }
  detail::write_file_atomic(*path_, out.str());
}

CachingTranslator::CachingTranslator(std::shared_ptr<TranslatorClient> remote,
                                     std::shared_ptr<TranslationCache> cache,
                                     std::ptrdiff_t max_in_flight)
    : remote_(std::move(remote)),
      cache_(cache ? std::move(cache) : std::make_shared<TranslationCache>()),
      in_flight_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, 64)) {}

std::string CachingTranslator::translate(std::string_view word, std::string_view src,
                                         std::string_view dst) {
  if (word.empty()) throw std::invalid_argument("translate: empty word");
  if (auto hit = cache_->get(word, src, dst)) return *hit;
  in_flight_.acquire();
  std::string gloss;
  try {
    ++remote_calls_;
    gloss = remote_->translate(word, src, dst);
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();
  cache_->put(word, src, dst, gloss);
  return gloss;
}

std::string FixtureTranslator::translate(std::string_view word, std::string_view,
                                         std::string_view) {
  if (word.empty()) throw std::invalid_argument("translate: empty word");
  ++calls_;
  switch (failure_) {
    case Failure::Timeout: throw TransientError("fixture timeout");
    case Failure::Malformed: throw ProtocolError("fixture malformed response");
    case Failure::None: break;
  }
  auto it = table_.find(word);
  if (it == table_.end()) throw ProtocolError("no translation for \"" + std::string(word) + "\"");
  return it->second;
}

HttpTranslator::HttpTranslator(HttpTranslatorConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("translator endpoint must be an absolute URL");
  }
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = cfg_.endpoint;
    path_ = "/";
  } else {
    scheme_host_port_ = cfg_.endpoint.substr(0, path_start);
    path_ = cfg_.endpoint.substr(path_start);
  }
}

std::string HttpTranslator::translate(std::string_view word, std::string_view src,
                                      std::string_view dst) {
  if (word.empty()) throw std::invalid_argument("translate: empty word");
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const nlohmann::json body = {
      {"text", std::string(word)}, {"source", std::string(src)}, {"target", std::string(dst)}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw TransientError("translator request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status == 408 || res->status >= 500) {
    throw TransientError("translator returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProtocolError("translator returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("translator response is not JSON");
  }
  if (!reply.is_object() || !reply.contains("translation") ||
      !reply["translation"].is_string() || reply["translation"].get<std::string>().empty()) {
    throw ProtocolError("translator response lacks a \"translation\" string");
  }
  return reply["translation"].get<std::string>();
}

}  // namespace cmsa::codeswitch
