#include "fft.hpp"

#include <algorithm>
#include <cstring>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "sbd/error.hpp"

namespace sbd::detail {
namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
    if (p == nullptr) throw std::bad_alloc();
    return std::unique_ptr<T[], FftwFree>(p);
}

}  // namespace

HalfSpectrum forward_fft(const std::vector<double>& data, std::size_t width, std::size_t height) {
    if (data.size() != width * height) throw ValidationError("fft input size mismatch");
    HalfSpectrum out{width, height, {}};
    const std::size_t n_out = height * out.cols();
    auto in = fftw_buffer<double>(data.size());
    auto spec = fftw_buffer<fftw_complex>(n_out);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_2d(static_cast<int>(height), static_cast<int>(width), in.get(), spec.get(),
                                    FFTW_ESTIMATE);
    }
    std::copy(data.begin(), data.end(), in.get());
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    out.bins.resize(n_out);
    std::memcpy(static_cast<void*>(out.bins.data()), spec.get(), sizeof(fftw_complex) * n_out);
    return out;
}

std::vector<double> inverse_fft(const HalfSpectrum& spectrum) {
    const std::size_t n = spectrum.width * spectrum.height;
    const std::size_t n_in = spectrum.height * spectrum.cols();
    auto spec = fftw_buffer<fftw_complex>(n_in);
    auto out = fftw_buffer<double>(n);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        // c2r destroys its input; the copy below happens after planning.
        plan = fftw_plan_dft_c2r_2d(static_cast<int>(spectrum.height), static_cast<int>(spectrum.width), spec.get(),
                                    out.get(), FFTW_ESTIMATE);
    }
    std::memcpy(spec.get(), spectrum.bins.data(), sizeof(fftw_complex) * n_in);
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<double> result(out.get(), out.get() + n);
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : result) v *= scale;
    return result;
}

}  // namespace sbd::detail
