#include "oscflat/parallel.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace oscflat::par {

std::vector<Partition> make_partitions(int first_dim_len, int workers) {
    if (workers < 1) throw ConfigError("make_partitions: workers must be >= 1");
    if (first_dim_len < 0) throw ConfigError("make_partitions: negative length");
    std::vector<Partition> parts(workers);
    const int base = first_dim_len / workers;
    const int extra = first_dim_len % workers;
    int at = 0;
    for (int w = 0; w < workers; ++w) {
        const int n = base + (w < extra ? 1 : 0);
        parts[w] = {w, at, at + n};
        at += n;
    }
    return parts;
}

double makespan(int beams, int threads, double per_beam_time) {
    if (threads < 1 || per_beam_time <= 0.0)
        throw ConfigError("makespan: threads and per_beam_time must be positive");
    if (beams < 0) throw ConfigError("makespan: negative beams");
    if (beams == 0) return 0.0;
    const int rounds = (beams + threads - 1) / threads;
    return rounds * per_beam_time;
}

double speedup(double t_old, double t_new) {
    if (t_old <= 0.0 || t_new <= 0.0) throw ConfigError("speedup: times must be positive");
    return t_old / t_new;
}

double efficiency(double S, int p) {
    if (p < 1) throw ConfigError("efficiency: p must be >= 1");
    return S / p;
}

std::string AutotuneReport::to_csv() const {
    std::ostringstream os;
    os << "nodes,ratio,predicted_steps_per_sec,best\n";
    os.precision(10);
    for (const auto& c : grid) {
        os << c.nodes << "," << c.ratio << ",";
        if (c.feasible)
            os << c.steps_per_sec;
        else
            os << "infeasible";
        os << "," << (c.best_for_nodes ? 1 : 0) << "\n";
    }
    os << "# knee_nodes," << knee_nodes << " # added nodes beyond this gain < "
       << knee_threshold * 100.0 << "%\n";
    return os.str();
}

AutotuneReport autotune(int total_beams, const std::vector<WorkerProfile>& per_node,
                        int min_nodes, int max_nodes, double ratio_min,
                        double ratio_max, double ratio_step, double knee_threshold) {
    if (per_node.empty()) throw ConfigError("autotune: need at least one worker profile");
    if (min_nodes < 1 || max_nodes < min_nodes)
        throw ConfigError("autotune: empty node range");

    AutotuneReport rep;
    rep.knee_threshold = knee_threshold;

    const bool hetero = per_node.size() >= 2;
    double prev_best = 0.0;
    rep.knee_nodes = min_nodes;

    for (int nodes = min_nodes; nodes <= max_nodes; ++nodes) {
        const int node_beams = (total_beams + nodes - 1) / nodes;  // most-loaded node
        double best_sps = -1.0;
        std::size_t best_idx = 0;
        std::size_t row_begin = rep.grid.size();

        auto eval_cell = [&](double ratio) {
            AutotuneCell cell;
            cell.nodes = nodes;
            cell.ratio = ratio;
            // Split the node's beams across its workers: the first profile is
            // the reference side (denominator of the ratio), the second gets
            // ratio-times its share. Homogeneous single-profile nodes take all.
            std::vector<int> share(per_node.size(), 0);
            if (!hetero) {
                share[0] = node_beams;
            } else {
                const double denom = 1.0 + ratio;
                share[1] = static_cast<int>(std::lround(node_beams * ratio / denom));
                share[0] = node_beams - share[1];
            }
            bool feasible = true;
            double t_iter = 0.0;
            for (std::size_t i = 0; i < per_node.size(); ++i) {
                if (node_beams > 0 && share[i] <= 0) feasible = false;
                t_iter = std::max(t_iter, makespan(share[i], per_node[i].threads,
                                                   per_node[i].per_beam_time));
            }
            cell.feasible = feasible && t_iter > 0.0;
            cell.steps_per_sec = cell.feasible ? 1.0 / t_iter : 0.0;
            rep.grid.push_back(cell);
        };

        if (!hetero) {
            eval_cell(1.0);
        } else {
            const int n_ratios = static_cast<int>(std::floor((ratio_max - ratio_min) / ratio_step + 0.5)) + 1;
            for (int i = 0; i < n_ratios; ++i) eval_cell(ratio_min + i * ratio_step);
        }

        for (std::size_t i = row_begin; i < rep.grid.size(); ++i) {
            const auto& c = rep.grid[i];
            if (c.feasible && c.steps_per_sec > best_sps) {
                best_sps = c.steps_per_sec;
                best_idx = i;  // ties resolve to the lowest ratio
            }
        }
        if (best_sps > 0.0) rep.grid[best_idx].best_for_nodes = true;

        if (nodes == min_nodes) {
            prev_best = best_sps;
            rep.knee_nodes = nodes;
        } else if (best_sps > prev_best * (1.0 + knee_threshold)) {
            rep.knee_nodes = nodes;
            prev_best = best_sps;
        }
    }
    return rep;
}

// ---------------- Comm ----------------

Comm::Comm(int lanes, double timeout_s) : lanes_(lanes), timeout_s_(timeout_s) {
    if (lanes < 1) throw ConfigError("Comm: lanes must be >= 1");
    slots_.resize(lanes);
    max_slots_.assign(lanes, 0.0);
    wait_s_.assign(lanes, 0.0);
}

void Comm::barrier(int lane) {
    if (lanes_ == 1) {
        if (aborted_) throw ParallelError("collective aborted: " + abort_reason_);
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::unique_lock<std::mutex> lk(m_);
    if (aborted_) throw ParallelError("collective aborted: " + abort_reason_);
    const std::uint64_t gen = generation_;
    if (++arrived_ == lanes_) {
        arrived_ = 0;
        ++generation_;
        cv_.notify_all();
    } else {
        const bool ok = cv_.wait_for(lk, std::chrono::duration<double>(timeout_s_),
                                     [&] { return generation_ != gen || aborted_; });
        if (aborted_) throw ParallelError("collective aborted: " + abort_reason_);
        if (!ok) {
            aborted_ = true;
            abort_reason_ = "deadlock: a worker missed a collective (timeout " +
                            std::to_string(timeout_s_) + " s)";
            cv_.notify_all();
            throw ParallelError(abort_reason_);
        }
    }
    wait_s_[lane] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void Comm::reduce_sum(int lane, std::span<const double> local, std::span<double> out) {
    slots_[lane].assign(local.begin(), local.end());
    barrier(lane);
    if (lane == 0) {
        sum_out_.assign(local.size(), 0.0);
        for (int w = 0; w < lanes_; ++w) {  // fixed ascending worker order
            if (slots_[w].size() != local.size())
                throw ParallelError("reduce_sum: payload size mismatch across workers");
            for (std::size_t i = 0; i < local.size(); ++i) sum_out_[i] += slots_[w][i];
        }
    }
    barrier(lane);
    std::copy(sum_out_.begin(), sum_out_.end(), out.begin());
    barrier(lane);
}

geom::PartialSums Comm::reduce_sum(int lane, const geom::PartialSums& local) {
    double buf[geom::PartialSums::kDoubles];
    local.to_doubles(buf);
    double out[geom::PartialSums::kDoubles];
    reduce_sum(lane, {buf, geom::PartialSums::kDoubles}, {out, geom::PartialSums::kDoubles});
    return geom::PartialSums::from_doubles(out);
}

double Comm::reduce_max(int lane, double local) {
    max_slots_[lane] = local;
    barrier(lane);
    if (lane == 0) {
        double m = max_slots_[0];
        for (int w = 1; w < lanes_; ++w) m = std::max(m, max_slots_[w]);
        max_out_ = m;
    }
    barrier(lane);
    const double out = max_out_;
    barrier(lane);
    return out;
}

void Comm::run_root(int lane, const std::function<void()>& fn) {
    barrier(lane);
    if (lane == 0) fn();
    barrier(lane);
}

void Comm::abort(const std::string& why) {
    std::lock_guard<std::mutex> lk(m_);
    aborted_ = true;
    abort_reason_ = why;
    cv_.notify_all();
}

void run_lanes(Comm& comm, int lanes, const std::function<void(int)>& fn) {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(lanes);

    auto body = [&](int lane) {
        try {
            fn(lane);
        } catch (...) {
            errors[lane] = std::current_exception();
            comm.abort("worker " + std::to_string(lane) + " failed");
        }
    };

    for (int w = 1; w < lanes; ++w) threads.emplace_back(body, w);
    body(0);
    for (auto& t : threads) t.join();

    for (int w = 0; w < lanes; ++w) {
        if (!errors[w]) continue;
        try {
            std::rethrow_exception(errors[w]);
        } catch (const ParallelError&) {
            continue;  // secondary abort noise; prefer the root cause
        } catch (...) {
            std::rethrow_exception(errors[w]);
        }
    }
    for (int w = 0; w < lanes; ++w)
        if (errors[w]) std::rethrow_exception(errors[w]);
}

}  // namespace oscflat::par
