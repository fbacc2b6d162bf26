#pragma once

// Thin RAII wrapper over a forward complex FFTW plan with its own buffers.

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <stdexcept>

namespace sgnoma::detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

class ForwardFft {
public:
    explicit ForwardFft(int n) : n_(n) {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        in_ = fftw_alloc_complex(std::size_t(n));
        out_ = fftw_alloc_complex(std::size_t(n));
        if (!in_ || !out_) throw std::bad_alloc();
        plan_ = fftw_plan_dft_1d(n, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
        if (!plan_) throw std::runtime_error("fftw plan creation failed");
    }
    ~ForwardFft() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    ForwardFft(const ForwardFft&) = delete;
    ForwardFft& operator=(const ForwardFft&) = delete;

    int size() const { return n_; }
    std::complex<double>* in() { return reinterpret_cast<std::complex<double>*>(in_); }
    const std::complex<double>* out() const { return reinterpret_cast<const std::complex<double>*>(out_); }
    void execute() { fftw_execute(plan_); }

private:
    int n_;
    fftw_complex* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

}  // namespace sgnoma::detail
