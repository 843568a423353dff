#pragma once

// Data-parallel inner loops behind the tensor ops. Each kernel has a portable
// scalar reference and an AVX2/FMA variant compiled in its own translation
// unit; the variant is chosen once at runtime from CPUID. Setting the
// environment variable EMBER_ISA=scalar forces the reference path.
//
// All matrices are row-major with explicit leading dimensions. GEMM kernels
// accumulate into C (C += ...). Reduction order is fixed per ISA, so results
// are bit-reproducible on a given machine.

#include <cstddef>
#include <string_view>

namespace ember::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);
  // C[k x n] += A[m x k]^T * B[m x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  double (*dot)(std::size_t n, const double* x, const double* y);
};

const KernelTable& scalar_table();
/// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool isa_supported(Isa isa);
std::string_view isa_name(Isa isa);

/// Table for a specific ISA; throws ConfigError if unsupported.
const KernelTable& table(Isa isa);

/// The ISA picked at startup (best supported, unless EMBER_ISA overrides).
Isa active_isa();
const KernelTable& active();

/// Overrides the active ISA for the rest of the process (tests, benchmarks).
void set_active_isa(Isa isa);

}  // namespace ember::kernels
