#include "manifest.hpp"

#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "ecdiff/errors.hpp"
#include "ecdiff/io.hpp"

namespace ecdiff::cli {

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

RunManifest::RunManifest(std::string command, nlohmann::json config, unsigned long long seed)
    : command_(std::move(command)), config_(std::move(config)), seed_(seed) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_[path.string()] = file_sha256(path);
}

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs_.push_back(path.string());
}

void RunManifest::write(const std::filesystem::path& dir) {
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  const nlohmann::json doc = {{"command", command_}, {"config", config_},   {"seed", seed_},
                              {"inputs", inputs_},   {"outputs", outputs_}, {"wall_time_s", wall}};
  write_file_atomic(dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace ecdiff::cli
