#include "sgdboot/rng.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace sgdboot {

namespace {

void ensure_sodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  });
}

void store_le(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t load_le(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | in[i];
  return v;
}

std::uint64_t siphash(std::uint64_t key, const unsigned char* msg, std::size_t len) {
  ensure_sodium();
  unsigned char k[crypto_shorthash_KEYBYTES] = {};
  store_le(k, key);
  store_le(k + 8, 0x73676462'6f6f7421ULL);
  unsigned char out[crypto_shorthash_BYTES];
  crypto_shorthash(out, msg, len, k);
  return load_le(out);
}

}  // namespace

std::uint64_t substream(std::uint64_t key, std::uint64_t index) {
  unsigned char msg[8];
  store_le(msg, index);
  return siphash(key, msg, sizeof msg);
}

std::uint64_t derive_key(std::uint64_t master, StreamTag tag, std::uint64_t index) {
  unsigned char msg[16];
  store_le(msg, static_cast<std::uint64_t>(tag));
  store_le(msg + 8, index);
  return siphash(master, msg, sizeof msg);
}

}  // namespace sgdboot
