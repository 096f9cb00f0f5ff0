#include "selfevo/embedding.hpp"

#include <cmath>

#include "selfevo/error.hpp"
#include "selfevo/text.hpp"

namespace selfevo::metrics {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vector normalized(Vector v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) return v;
  for (double& x : v) x /= n;
  return v;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(Errc::alignment, "embedding dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

Vector mean_pool(const std::vector<Vector>& vectors) {
  if (vectors.empty()) return {};
  Vector out(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (v.size() != out.size()) throw Error(Errc::alignment, "embedding dimensions differ");
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  }
  for (double& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

Vector HashEmbedder::embed_one(const std::string& token) const {
  std::uint64_t state = text::fnv1a(token) ^ seed_;
  Vector v(dimension_);
  for (double& x : v) {
    const std::uint64_t r = splitmix64(state);
    x = static_cast<double>(r >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }
  return normalized(std::move(v));
}

std::vector<Vector> HashEmbedder::embed(const std::vector<std::string>& tokens) {
  std::vector<Vector> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(embed_one(t));
  return out;
}

std::string HashEmbedder::describe() const {
  return "hash(dim=" + std::to_string(dimension_) + ",seed=" + std::to_string(seed_) + ")";
}

TableEmbedder::TableEmbedder(std::map<std::string, Vector> table) : table_(std::move(table)) {
  for (auto& [_, v] : table_) v = normalized(std::move(v));
}

std::vector<Vector> TableEmbedder::embed(const std::vector<std::string>& tokens) {
  std::vector<Vector> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = table_.find(t);
    if (it == table_.end()) throw Error(Errc::unavailable, "no embedding for token '" + t + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace selfevo::metrics
