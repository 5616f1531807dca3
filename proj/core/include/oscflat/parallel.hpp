#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "oscflat/geometry.hpp"
#include "oscflat/types.hpp"

namespace oscflat::par {

struct ParallelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Half-open trajectory range owned by one worker.
struct Partition {
    int worker_id = 0;
    int start_beam = 0;
    int end_beam = 0;

    int size() const { return end_beam - start_beam; }
};

/// Disjoint, ordered, covering split of [0, first_dim_len) over `workers`
/// lanes; the remainder goes to the lowest ids.
std::vector<Partition> make_partitions(int first_dim_len, int workers);

/// Quantized iteration time of one worker: ceil(beams/threads) * per-beam time.
double makespan(int beams, int threads, double per_beam_time);

double speedup(double t_old, double t_new);
double efficiency(double S, int p);

struct WorkerProfile {
    std::string cls;  // "cpu", "accel", ...
    int threads = 1;
    double per_beam_time = 1.0;  // seconds per beam per iteration
};

struct AutotuneCell {
    int nodes = 0;
    double ratio = 0.0;
    double steps_per_sec = 0.0;
    bool feasible = false;
    bool best_for_nodes = false;
};

struct AutotuneReport {
    std::vector<AutotuneCell> grid;
    int knee_nodes = 0;          // last node count whose gain beats the threshold
    double knee_threshold = 0.05;
    std::string to_csv() const;  // nodes,ratio,predicted_steps_per_sec,best
};

/// Exhaustive 2D sweep over node count x accel:cpu load ratio. Each node
/// carries one worker per profile; a node's share of the beams is split by
/// the ratio and the iteration time is the slowest worker's makespan.
AutotuneReport autotune(int total_beams, const std::vector<WorkerProfile>& per_node,
                        int min_nodes, int max_nodes, double ratio_min,
                        double ratio_max, double ratio_step,
                        double knee_threshold = 0.05);

/// Rendezvous collectives for in-process lanes. Every lane must call each
/// collective at the same schedule point; a missing participant trips the
/// deadlock timeout and every waiter receives a fatal error.
class Comm {
public:
    explicit Comm(int lanes, double timeout_s = 30.0);

    int lanes() const { return lanes_; }

    void barrier(int lane);

    /// Root (lane 0) publishes; everyone returns the root's value.
    template <typename T>
    T broadcast(int lane, const T& value) {
        static_assert(std::is_trivially_copyable_v<T>);
        if (lane == 0) {
            std::lock_guard<std::mutex> g(bcast_mutex_);
            bcast_buf_.assign(reinterpret_cast<const char*>(&value),
                              reinterpret_cast<const char*>(&value) + sizeof(T));
        }
        barrier(lane);
        T out;
        {
            std::lock_guard<std::mutex> g(bcast_mutex_);
            std::copy(bcast_buf_.begin(), bcast_buf_.end(), reinterpret_cast<char*>(&out));
        }
        barrier(lane);
        return out;
    }

    /// Sum-combine fixed-size per-lane payloads in ascending worker order.
    void reduce_sum(int lane, std::span<const double> local, std::span<double> out);

    geom::PartialSums reduce_sum(int lane, const geom::PartialSums& local);

    double reduce_max(int lane, double local);

    /// barrier; lane 0 runs fn; barrier.
    void run_root(int lane, const std::function<void()>& fn);

    /// Wake every waiter with a fatal error (used when a lane dies).
    void abort(const std::string& why);

    /// Seconds this lane has spent blocked inside collectives.
    double wait_seconds(int lane) const { return wait_s_[lane]; }

private:
    int lanes_;
    double timeout_s_;

    std::mutex m_;
    std::condition_variable cv_;
    int arrived_ = 0;
    std::uint64_t generation_ = 0;
    bool aborted_ = false;
    std::string abort_reason_;

    std::mutex bcast_mutex_;
    std::vector<char> bcast_buf_;

    std::vector<std::vector<double>> slots_;
    std::vector<double> max_slots_;
    std::vector<double> sum_out_;
    double max_out_ = 0.0;

    std::vector<double> wait_s_;
};

/// Run fn(lane) on `lanes` threads; lane 0 runs on the calling thread.
/// The first exception wins, aborts the comm, and is rethrown here.
void run_lanes(Comm& comm, int lanes, const std::function<void(int)>& fn);

}  // namespace oscflat::par
