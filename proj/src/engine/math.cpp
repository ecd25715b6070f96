#include "engine/math.hpp"

#include <cstring>

#ifdef COTAUDIT_USE_CBLAS
#include <cblas.h>
#endif

namespace cotaudit {

#ifdef COTAUDIT_USE_CBLAS

void matmul(const float* a, const float* b, float* c, int m, int k, int n,
            const float* bias) {
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0f, a, k,
                b, n, 0.0f, c, n);
    if (bias) {
        for (int i = 0; i < m; ++i) {
            float* row = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) row[j] += bias[j];
        }
    }
}

void matmul_bt(const float* a, const float* b, float* c, int m, int k, int n) {
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, n, k, 1.0f, a, k,
                b, k, 0.0f, c, n);
}

#else

void matmul(const float* a, const float* b, float* c, int m, int k, int n,
            const float* bias) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        if (bias) {
            std::memcpy(crow, bias, static_cast<size_t>(n) * sizeof(float));
        } else {
            std::memset(crow, 0, static_cast<size_t>(n) * sizeof(float));
        }
        const float* arow = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_bt(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            float acc = 0.0f;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

#endif

}  // namespace cotaudit
