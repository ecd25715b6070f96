#pragma once

#include <cstddef>

namespace cotaudit {

// C[M,N] = A[M,K] @ B[K,N], row-major, optional broadcast bias added to
// each row. Backed by cblas sgemm when built with COTAUDIT_USE_CBLAS,
// otherwise a cache-friendly loop. Row i of C depends only on row i of A,
// which the patching invariants rely on.
void matmul(const float* a, const float* b, float* c, int m, int k, int n,
            const float* bias = nullptr);

// C[M,N] = A[M,K] @ B^T where B is [N,K] row-major (used for the tied
// unembedding: logits = x @ wte^T).
void matmul_bt(const float* a, const float* b, float* c, int m, int k, int n);

}  // namespace cotaudit
