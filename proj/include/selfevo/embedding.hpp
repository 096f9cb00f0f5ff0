#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace selfevo::metrics {

using Vector = std::vector<double>;

/// Token-embedding backend. Implementations return one unit-norm vector per
/// token and throw selfevo::Error (Errc::unavailable) when they cannot.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<Vector> embed(const std::vector<std::string>& tokens) = 0;
  virtual std::string describe() const = 0;
};

/// Deterministic test backend. Component j of token t is
/// u(splitmix64(fnv1a(t) ^ seed) iterated j+1 times) mapped to [-1, 1), then
/// the vector is normalized.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0) : dimension_(dimension), seed_(seed) {}

  std::vector<Vector> embed(const std::vector<std::string>& tokens) override;
  std::string describe() const override;

  Vector embed_one(const std::string& token) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

/// Fixed token -> vector table; unknown tokens make the embedder fail.
class TableEmbedder : public Embedder {
 public:
  explicit TableEmbedder(std::map<std::string, Vector> table);

  std::vector<Vector> embed(const std::vector<std::string>& tokens) override;
  std::string describe() const override { return "table"; }

 private:
  std::map<std::string, Vector> table_;
};

/// OpenAI-style embeddings endpoint: POST {model, input:[tokens]} and read
/// data[i].embedding.
class HttpEmbedder : public Embedder {
 public:
  struct Options {
    std::string url;
    std::string model;
    std::string api_key_env;
    std::chrono::milliseconds timeout{60000};
  };

  explicit HttpEmbedder(Options options) : options_(std::move(options)) {}

  std::vector<Vector> embed(const std::vector<std::string>& tokens) override;
  std::string describe() const override { return "http:" + options_.url; }

 private:
  Options options_;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Scales `v` to unit norm. A zero vector is returned unchanged.
Vector normalized(Vector v);

double dot(const Vector& a, const Vector& b);

/// Cosine similarity; 0 when either vector is zero.
double cosine(const Vector& a, const Vector& b);

Vector mean_pool(const std::vector<Vector>& vectors);

}  // namespace selfevo::metrics
