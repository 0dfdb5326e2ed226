#include "crawl/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace crawl {

namespace {

// One persistent helper thread per extra core. Each helper owns a single
// job slot guarded by its own mutex; the calling thread posts a closure,
// runs its own share, then blocks until the slot reports done. No shared
// counters, so the handshake is easy to reason about and cannot lose
// wakeups.
class Helper {
public:
    Helper() : thread_([this] { loop(); }) {}

    ~Helper() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_one();
        thread_.join();
    }

    void post(std::function<void()> job) {
        {
            std::lock_guard<std::mutex> lk(mu_);
            job_ = std::move(job);
            done_ = false;
        }
        cv_.notify_one();
    }

    void wait() {
        std::unique_lock<std::mutex> lk(mu_);
        done_cv_.wait(lk, [this] { return done_; });
    }

private:
    void loop() {
        std::unique_lock<std::mutex> lk(mu_);
        while (true) {
            cv_.wait(lk, [this] { return stop_ || job_ != nullptr; });
            if (stop_) return;
            std::function<void()> job = std::move(job_);
            job_ = nullptr;
            lk.unlock();
            job();
            lk.lock();
            done_ = true;
            done_cv_.notify_one();
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::function<void()> job_;
    bool done_ = true;
    bool stop_ = false;
    std::thread thread_;
};

int g_num_threads = []() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}();

std::vector<Helper>& helpers() {
    static std::vector<Helper>* h = new std::vector<Helper>(std::max(1, g_num_threads) - 1);
    return *h;
}

thread_local bool t_inside_parallel = false;

}  // namespace

int num_threads() { return g_num_threads; }

void set_num_threads(int n) { g_num_threads = std::max(1, n); }

void parallel_chunks(int64_t n, int n_chunks,
                     const std::function<void(int, int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int chunks = static_cast<int>(std::min<int64_t>(n_chunks, n));
    auto bound = [&](int c) { return n * c / chunks; };

    auto run_range = [&](int c0, int c1) {
        for (int c = c0; c < c1; ++c) fn(c, bound(c), bound(c + 1));
    };

    const int workers =
        std::min<int>(g_num_threads, static_cast<int>(helpers().size()) + 1);
    // Nested calls and the single-thread mode run inline.
    if (workers == 1 || chunks == 1 || t_inside_parallel) {
        run_range(0, chunks);
        return;
    }

    // Static chunk split across threads; deterministic regardless of how
    // many helpers exist because chunk boundaries depend only on (n, chunks).
    const int use = std::min(workers, chunks);
    int posted = 0;
    for (int t = 1; t < use; ++t) {
        int c0 = chunks * t / use;
        int c1 = chunks * (t + 1) / use;
        helpers()[t - 1].post([run_range, c0, c1] {
            t_inside_parallel = true;
            run_range(c0, c1);
            t_inside_parallel = false;
        });
        ++posted;
    }
    t_inside_parallel = true;
    run_range(0, chunks * 1 / use);
    t_inside_parallel = false;
    for (int t = 0; t < posted; ++t) helpers()[t].wait();
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    parallel_chunks(n, g_num_threads * 4, [&](int, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace crawl
