#include <atomic>
#include <cstdlib>
#include <string>

#include "ember/errors.hpp"
#include "ember/kernels.hpp"

namespace ember::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("EMBER_ISA")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

struct Active {
  std::atomic<Isa> isa;
  std::atomic<const KernelTable*> table;
};

Active& current() {
  static Active active{detect(), nullptr};
  static const bool init = [] {
    active.table.store(&table(active.isa.load()));
    return true;
  }();
  (void)init;
  return active;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
      return avx2_table() != nullptr && cpu_has_avx2_fma();
  }
  return false;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

const KernelTable& table(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("kernels: ISA " + std::string(isa_name(isa)) + " is not supported here");
  }
  return isa == Isa::Avx2 ? *avx2_table() : scalar_table();
}

Isa active_isa() { return current().isa.load(); }

const KernelTable& active() { return *current().table.load(); }

void set_active_isa(Isa isa) {
  const auto& t = table(isa);
  current().isa.store(isa);
  current().table.store(&t);
}

}  // namespace ember::kernels
