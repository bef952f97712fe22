#include "lpp/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

#include "lpp/errors.hpp"

namespace lpp::fft {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

void init_threads_once()
{
    static std::once_flag flag;
    std::call_once(flag, [] {
        fftw_init_threads();
    });
}

class Plan {
public:
    Plan(std::span<std::complex<double>> data, std::size_t width, std::size_t height,
         Direction direction)
    {
        init_threads_once();
        std::lock_guard lock(planner_mutex());
        fftw_plan_with_nthreads(thread_count());
        auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
        plan_ = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), ptr, ptr,
                                 direction == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
        if (plan_ == nullptr)
            throw Error("FFTW failed to create a plan for a " + std::to_string(width) + "x" +
                        std::to_string(height) + " transform");
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan()
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }

    void execute() const { fftw_execute(plan_); }

private:
    fftw_plan plan_ = nullptr;
};

}  // namespace

std::size_t good_size(std::size_t n) noexcept
{
    for (std::size_t m = std::max<std::size_t>(n + (n % 2), 2);; m += 2) {
        std::size_t r = m;
        for (std::size_t p : {2, 3, 5, 7})
            while (r % p == 0)
                r /= p;
        if (r == 1)
            return m;
    }
}

void transform_2d(std::span<std::complex<double>> data, std::size_t width, std::size_t height,
                  Direction direction)
{
    detail::require(data.size() == width * height, "FFT buffer size does not match dimensions");
    Plan plan(data, width, height, direction);
    plan.execute();
}

namespace {
std::atomic<int> thread_override{0};
}

void set_thread_count(int count) noexcept { thread_override.store(count > 0 ? count : 0); }

int thread_count() noexcept
{
    if (const int n = thread_override.load(); n > 0)
        return n;
    static const int count = [] {
        int n = 0;
        if (const char* env = std::getenv("LPP_THREADS"))
            n = std::atoi(env);
        if (n <= 0)
            n = static_cast<int>(std::thread::hardware_concurrency());
        return n > 0 ? n : 1;
    }();
    return count;
}

}  // namespace lpp::fft
