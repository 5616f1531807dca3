#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "oscflat/types.hpp"

namespace oscflat::io {

// Self-describing binary snapshot container: fixed header (magic, version,
// dump mode, named dims, species order, config hash, per-species spectra),
// then one record per snapshot {iter, r, dr, t_wall, payload, checksum}.
// Payload is little-endian float64, row-major in the listed dim order.

inline constexpr char kSnapshotMagic[8] = {'O', 'S', 'C', 'F', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct SnapshotDims {
    int abins = 1;
    int pbins = 1;
    int prtcls = 4;
    int comps = 4;
    int ebins = 1;
};

/// Bytes of one whole-state snapshot payload (dump mode 1).
std::uint64_t mode1_payload_bytes(std::uint64_t abins, std::uint64_t pbins,
                                  std::uint64_t prtcls, std::uint64_t comps,
                                  std::uint64_t ebins);

struct RecordMeta {
    std::uint64_t iter = 0;
    double r = 0.0;
    double dr = 0.0;
    double t_wall = 0.0;
};

/// Spectra copied into the header so analysis is a pure function of the file.
struct SpectraHeader {
    double E0 = 0.0, E1 = 0.0;
    std::uint64_t ebins = 0;
    std::array<double, kSpeciesCount> coupling{};
    std::array<std::vector<double>, kSpeciesCount> f;
};

std::uint64_t fnv1a(const void* data, std::size_t bytes);

/// Appends snapshot records for one dump mode, rotating to a fresh file
/// every `new_file_step` snapshots and flushing to disk every `sync_step`.
/// File names: <prefix><tag><counter>_<worker>.
class SnapshotFileWriter {
public:
    SnapshotFileWriter(std::string directory, std::string prefix, int mode,
                       int worker_id, int new_file_step, int sync_step,
                       SnapshotDims dims, SpectraHeader spectra,
                       std::uint64_t config_hash);
    ~SnapshotFileWriter();

    SnapshotFileWriter(const SnapshotFileWriter&) = delete;
    SnapshotFileWriter& operator=(const SnapshotFileWriter&) = delete;

    void append(const RecordMeta& meta, std::span<const double> payload);
    void close();

    const std::vector<std::string>& files_written() const { return files_; }
    static std::string file_name(const std::string& prefix, int mode, int counter,
                                 int worker_id);

private:
    void open_next();

    std::string dir_, prefix_;
    int mode_, worker_id_, new_file_step_, sync_step_;
    SnapshotDims dims_;
    SpectraHeader spectra_;
    std::uint64_t config_hash_;
    std::FILE* fp_ = nullptr;
    int file_counter_ = 0;
    int in_file_ = 0;
    int since_sync_ = 0;
    std::vector<std::string> files_;
};

struct SnapshotHeader {
    std::uint32_t version = 0;
    std::uint32_t mode = 0;
    std::vector<std::string> dim_names;
    std::vector<std::uint64_t> dim_lens;
    std::array<std::string, kSpeciesCount> species;
    std::uint64_t config_hash = 0;
    SpectraHeader spectra;
    bool has_spectra = false;

    std::uint64_t payload_doubles() const;
};

class SnapshotReader {
public:
    explicit SnapshotReader(const std::string& path);

    const SnapshotHeader& header() const { return header_; }

    /// Sequentially reads the next record; false at end of file.
    /// Throws IoError on checksum failure or a truncated record.
    bool next(RecordMeta& meta, std::vector<double>& payload);

    /// Reads through the file and returns the final record.
    RecordMeta read_last(std::vector<double>& payload);

private:
    std::string path_;
    std::FILE* fp_ = nullptr;
    SnapshotHeader header_;

    struct Closer {
        void operator()(std::FILE* f) const {
            if (f) std::fclose(f);
        }
    };
    std::unique_ptr<std::FILE, Closer> owner_;
};

/// Per-mode dump gating state. A gate of zero disables that criterion; a dump
/// is due when ANY enabled gate's delta since the last dump is reached.
struct DumpGates {
    double r_step = 0.0;
    double t_step = 0.0;
    std::uint64_t itr_step = 0;
};

struct DumpMarks {
    double r = 0.0;
    double t = 0.0;
    std::uint64_t iter = 0;
};

bool should_dump(const DumpGates& gates, double r, double t_wall,
                 std::uint64_t iter, const DumpMarks& last);

/// Single writer lane: owns the file handles, drains a bounded queue of
/// extracted snapshot buffers. Producers block only on queue handoff.
class WriterLane {
public:
    struct Job {
        int mode = 1;
        RecordMeta meta;
        std::vector<double> payload;
    };

    WriterLane(std::unique_ptr<SnapshotFileWriter> mode1,
               std::unique_ptr<SnapshotFileWriter> mode2,
               bool async, std::size_t queue_capacity = 4);
    ~WriterLane();

    void submit(Job job);
    /// Drain the queue and close files; rethrows any deferred write error.
    void finish();

private:
    void write_one(const Job& job);
    void loop();

    std::unique_ptr<SnapshotFileWriter> w1_, w2_;
    bool async_;
    std::size_t cap_;
    std::mutex m_;
    std::condition_variable cv_;
    std::deque<Job> q_;
    bool done_ = false;
    std::exception_ptr error_;
    std::thread thread_;
};

}  // namespace oscflat::io
