#include "oscflat/snapshot.hpp"

#include <cstring>
#include <filesystem>

namespace oscflat::io {

namespace {

void put_bytes(std::FILE* fp, const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, fp) != n)
        throw IoError("snapshot: short write (disk full or file closed?)");
}

template <typename T>
void put(std::FILE* fp, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(fp, &v, sizeof(T));
}

void put_name8(std::FILE* fp, const std::string& s) {
    char buf[8] = {};
    std::memcpy(buf, s.data(), std::min<std::size_t>(s.size(), 8));
    put_bytes(fp, buf, 8);
}

bool get_bytes(std::FILE* fp, void* p, std::size_t n) {
    return std::fread(p, 1, n, fp) == n;
}

template <typename T>
bool get(std::FILE* fp, T& v) {
    return get_bytes(fp, &v, sizeof(T));
}

std::string get_name8(std::FILE* fp) {
    char buf[9] = {};
    if (!get_bytes(fp, buf, 8)) throw IoError("snapshot: truncated header");
    return std::string(buf);
}

const char* kDimNames6[6] = {"r", "theta", "phi", "prtcl", "comp", "ebin"};
const char* kDimNames4[4] = {"r", "theta", "phi", "prtcl"};

}  // namespace

std::uint64_t mode1_payload_bytes(std::uint64_t abins, std::uint64_t pbins,
                                  std::uint64_t prtcls, std::uint64_t comps,
                                  std::uint64_t ebins) {
    return abins * pbins * prtcls * comps * ebins * 8ull;
}

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string SnapshotFileWriter::file_name(const std::string& prefix, int mode,
                                          int counter, int worker_id) {
    const char* tag = (mode == 1) ? "Snapshot" : "Average";
    return prefix + tag + std::to_string(counter) + "_" + std::to_string(worker_id);
}

SnapshotFileWriter::SnapshotFileWriter(std::string directory, std::string prefix,
                                       int mode, int worker_id, int new_file_step,
                                       int sync_step, SnapshotDims dims,
                                       SpectraHeader spectra, std::uint64_t config_hash)
    : dir_(std::move(directory)), prefix_(std::move(prefix)), mode_(mode),
      worker_id_(worker_id), new_file_step_(std::max(1, new_file_step)),
      sync_step_(std::max(1, sync_step)), dims_(dims), spectra_(std::move(spectra)),
      config_hash_(config_hash) {
    if (mode_ != 1 && mode_ != 2) throw ConfigError("SnapshotFileWriter: mode must be 1 or 2");
}

SnapshotFileWriter::~SnapshotFileWriter() {
    if (fp_) std::fclose(fp_);
}

void SnapshotFileWriter::open_next() {
    if (fp_) {
        std::fclose(fp_);
        fp_ = nullptr;
    }
    namespace fs = std::filesystem;
    if (!dir_.empty()) fs::create_directories(dir_);
    const std::string name = file_name(prefix_, mode_, file_counter_, worker_id_);
    const std::string path = dir_.empty() ? name : dir_ + "/" + name;
    fp_ = std::fopen(path.c_str(), "wb");
    if (!fp_) throw IoError("snapshot: cannot open " + path);
    files_.push_back(path);
    ++file_counter_;
    in_file_ = 0;

    put_bytes(fp_, kSnapshotMagic, sizeof(kSnapshotMagic));
    put<std::uint32_t>(fp_, kSnapshotVersion);
    put<std::uint32_t>(fp_, static_cast<std::uint32_t>(mode_));
    const std::uint32_t ndims = (mode_ == 1) ? 6 : 4;
    put<std::uint32_t>(fp_, ndims);
    const std::uint64_t lens6[6] = {1, static_cast<std::uint64_t>(dims_.abins),
                                    static_cast<std::uint64_t>(dims_.pbins),
                                    static_cast<std::uint64_t>(dims_.prtcls),
                                    static_cast<std::uint64_t>(dims_.comps),
                                    static_cast<std::uint64_t>(dims_.ebins)};
    for (std::uint32_t d = 0; d < ndims; ++d) {
        put_name8(fp_, (mode_ == 1) ? kDimNames6[d] : kDimNames4[d]);
        put<std::uint64_t>(fp_, lens6[d]);
    }
    for (int s = 0; s < kSpeciesCount; ++s)
        put_name8(fp_, species_name(static_cast<Species>(s)));
    put<std::uint64_t>(fp_, config_hash_);

    const std::uint32_t has_spectra = spectra_.ebins > 0 ? 1 : 0;
    put<std::uint32_t>(fp_, has_spectra);
    if (has_spectra) {
        put<std::uint64_t>(fp_, spectra_.ebins);
        put<double>(fp_, spectra_.E0);
        put<double>(fp_, spectra_.E1);
        for (int s = 0; s < kSpeciesCount; ++s) {
            put<double>(fp_, spectra_.coupling[s]);
            put_bytes(fp_, spectra_.f[s].data(), spectra_.f[s].size() * sizeof(double));
        }
    }
}

void SnapshotFileWriter::append(const RecordMeta& meta, std::span<const double> payload) {
    if (!fp_ || in_file_ >= new_file_step_) open_next();

    const std::uint64_t expect =
        (mode_ == 1)
            ? mode1_payload_bytes(dims_.abins, dims_.pbins, dims_.prtcls, dims_.comps,
                                  dims_.ebins) / 8
            : static_cast<std::uint64_t>(dims_.abins) * dims_.pbins * dims_.prtcls;
    if (payload.size() != expect)
        throw IoError("snapshot: payload length does not match the declared dims");

    put<std::uint64_t>(fp_, meta.iter);
    put<double>(fp_, meta.r);
    put<double>(fp_, meta.dr);
    put<double>(fp_, meta.t_wall);
    put_bytes(fp_, payload.data(), payload.size() * sizeof(double));
    put<std::uint64_t>(fp_, fnv1a(payload.data(), payload.size() * sizeof(double)));

    ++in_file_;
    if (++since_sync_ >= sync_step_) {
        std::fflush(fp_);
        since_sync_ = 0;
    }
}

void SnapshotFileWriter::close() {
    if (fp_) {
        std::fclose(fp_);
        fp_ = nullptr;
    }
}

std::uint64_t SnapshotHeader::payload_doubles() const {
    std::uint64_t n = 1;
    for (const auto l : dim_lens) n *= l;
    return n;
}

SnapshotReader::SnapshotReader(const std::string& path) : path_(path) {
    fp_ = std::fopen(path.c_str(), "rb");
    if (!fp_) throw IoError("snapshot: cannot open " + path);
    owner_.reset(fp_);

    char magic[8];
    if (!get_bytes(fp_, magic, 8) || std::memcmp(magic, kSnapshotMagic, 8) != 0)
        throw IoError("snapshot: bad magic in " + path);
    if (!get(fp_, header_.version) || header_.version != kSnapshotVersion)
        throw IoError("snapshot: unsupported format version in " + path);
    std::uint32_t ndims = 0;
    if (!get(fp_, header_.mode) || !get(fp_, ndims) || ndims > 8)
        throw IoError("snapshot: corrupt header in " + path);
    header_.dim_names.resize(ndims);
    header_.dim_lens.resize(ndims);
    for (std::uint32_t d = 0; d < ndims; ++d) {
        header_.dim_names[d] = get_name8(fp_);
        if (!get(fp_, header_.dim_lens[d])) throw IoError("snapshot: truncated header");
    }
    for (int s = 0; s < kSpeciesCount; ++s) header_.species[s] = get_name8(fp_);
    if (!get(fp_, header_.config_hash)) throw IoError("snapshot: truncated header");

    std::uint32_t has_spectra = 0;
    if (!get(fp_, has_spectra)) throw IoError("snapshot: truncated header");
    header_.has_spectra = has_spectra != 0;
    if (header_.has_spectra) {
        if (!get(fp_, header_.spectra.ebins) || !get(fp_, header_.spectra.E0) ||
            !get(fp_, header_.spectra.E1))
            throw IoError("snapshot: truncated spectra header");
        for (int s = 0; s < kSpeciesCount; ++s) {
            if (!get(fp_, header_.spectra.coupling[s]))
                throw IoError("snapshot: truncated spectra header");
            header_.spectra.f[s].resize(header_.spectra.ebins);
            if (!get_bytes(fp_, header_.spectra.f[s].data(),
                           header_.spectra.ebins * sizeof(double)))
                throw IoError("snapshot: truncated spectra header");
        }
    }
}

bool SnapshotReader::next(RecordMeta& meta, std::vector<double>& payload) {
    std::uint64_t iter;
    if (!get(fp_, iter)) return false;  // clean EOF
    meta.iter = iter;
    if (!get(fp_, meta.r) || !get(fp_, meta.dr) || !get(fp_, meta.t_wall))
        throw IoError("snapshot: truncated record header in " + path_);
    const std::uint64_t n = header_.payload_doubles();
    payload.resize(n);
    if (!get_bytes(fp_, payload.data(), n * sizeof(double)))
        throw IoError("snapshot: truncated payload in " + path_);
    std::uint64_t stored = 0;
    if (!get(fp_, stored)) throw IoError("snapshot: truncated checksum in " + path_);
    if (stored != fnv1a(payload.data(), n * sizeof(double)))
        throw IoError("snapshot: payload checksum failure in " + path_);
    return true;
}

RecordMeta SnapshotReader::read_last(std::vector<double>& payload) {
    RecordMeta meta;
    bool any = false;
    std::vector<double> buf;
    while (next(meta, buf)) {
        payload = buf;
        any = true;
    }
    if (!any) throw IoError("snapshot: no records in " + path_);
    return meta;
}

bool should_dump(const DumpGates& gates, double r, double t_wall,
                 std::uint64_t iter, const DumpMarks& last) {
    if (gates.r_step > 0.0 && r - last.r >= gates.r_step) return true;
    if (gates.t_step > 0.0 && t_wall - last.t >= gates.t_step) return true;
    if (gates.itr_step > 0 && iter - last.iter >= gates.itr_step) return true;
    return false;
}

WriterLane::WriterLane(std::unique_ptr<SnapshotFileWriter> mode1,
                       std::unique_ptr<SnapshotFileWriter> mode2, bool async,
                       std::size_t queue_capacity)
    : w1_(std::move(mode1)), w2_(std::move(mode2)), async_(async), cap_(queue_capacity) {
    if (async_) thread_ = std::thread([this] { loop(); });
}

WriterLane::~WriterLane() {
    try {
        finish();
    } catch (...) {
        // destructor swallows deferred errors; finish() reports them
    }
}

void WriterLane::write_one(const Job& job) {
    SnapshotFileWriter* w = (job.mode == 1) ? w1_.get() : w2_.get();
    if (!w) throw IoError("dump: no writer configured for mode " + std::to_string(job.mode));
    w->append(job.meta, job.payload);
}

void WriterLane::loop() {
    for (;;) {
        Job job;
        {
            std::unique_lock<std::mutex> lk(m_);
            cv_.wait(lk, [&] { return !q_.empty() || done_; });
            if (q_.empty() && done_) return;
            job = std::move(q_.front());
            q_.pop_front();
            cv_.notify_all();
        }
        try {
            write_one(job);
        } catch (...) {
            std::lock_guard<std::mutex> lk(m_);
            if (!error_) error_ = std::current_exception();
        }
    }
}

void WriterLane::submit(Job job) {
    if (!async_) {
        write_one(job);
        return;
    }
    std::unique_lock<std::mutex> lk(m_);
    if (error_) std::rethrow_exception(error_);
    cv_.wait(lk, [&] { return q_.size() < cap_; });
    q_.push_back(std::move(job));
    cv_.notify_all();
}

void WriterLane::finish() {
    if (async_ && thread_.joinable()) {
        {
            std::lock_guard<std::mutex> lk(m_);
            done_ = true;
        }
        cv_.notify_all();
        thread_.join();
    }
    if (w1_) w1_->close();
    if (w2_) w2_->close();
    if (error_) {
        auto e = error_;
        error_ = nullptr;
        std::rethrow_exception(e);
    }
}

}  // namespace oscflat::io
