#include "ddlab/ingest.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace ddlab {

namespace {

constexpr char kMagic[4] = {'D', 'D', 'F', 'T'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void le(T v) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
        U u;
        std::memcpy(&u, &v, sizeof u);
        for (std::size_t i = 0; i < sizeof u; ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    }
    void f64_rows(const Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) le(m(i, j));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    /// Ensures `count` elements of `width` bytes remain for `block`.
    void need(std::uint64_t count, std::size_t width, const char* block) const {
        const std::uint64_t remaining = in_.size() - pos_;
        if (width != 0 && count > remaining / width)
            throw CorruptFile("truncated table: block '" + std::string(block) + "' needs " +
                              std::to_string(count * width) + " bytes, " +
                              std::to_string(remaining) + " remain");
    }
    template <typename U>
    U le_uint(const char* block) {
        need(1, sizeof(U), block);
        U u = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(in_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return u;
    }
    double f64(const char* block) { return std::bit_cast<double>(le_uint<std::uint64_t>(block)); }

    Eigen::MatrixXd f64_rows(std::uint64_t rows, std::uint64_t cols, const char* block) {
        if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / cols)
            throw CorruptFile(std::string("block '") + block + "' size overflows");
        need(rows * cols, 8, block);
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                m(i, j) = f64(block);
                if (!std::isfinite(m(i, j)))
                    throw DataError(std::string("non-finite value in block '") + block + "' at row " +
                                    std::to_string(i) + ", col " + std::to_string(j));
            }
        }
        return m;
    }
    bool magic_ok() {
        if (in_.size() < 4 || std::memcmp(in_.data(), kMagic, 4) != 0) return false;
        pos_ = 4;
        return true;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace

std::vector<std::uint8_t> encode_table(const ModelOutputs& outputs,
                                       const std::optional<ClassifierHead>& head) {
    outputs.validate();
    if (head) head->check_against(outputs);
    std::uint8_t flags = 0;
    if (outputs.labels) flags |= kFlagLabels;
    if (outputs.logits) flags |= kFlagLogits;
    if (head) flags |= kFlagHead;

    Writer w;
    w.bytes(kMagic, 4);
    w.le(kTableVersion);
    w.le(static_cast<std::uint64_t>(outputs.features.rows()));
    w.le(static_cast<std::uint64_t>(outputs.features.cols()));
    w.le(flags);
    if (flags & (kFlagLogits | kFlagHead)) {
        const Eigen::Index C = outputs.logits ? outputs.logits->cols() : head->classes();
        w.le(static_cast<std::uint32_t>(C));
    }
    w.f64_rows(outputs.features);
    if (outputs.labels)
        for (Eigen::Index i = 0; i < outputs.labels->size(); ++i)
            w.le(static_cast<std::uint32_t>((*outputs.labels)(i)));
    if (outputs.logits) w.f64_rows(*outputs.logits);
    if (head) {
        w.f64_rows(head->W);
        w.f64_rows(head->b);
    }
    return w.take();
}

FeatureTable decode_table(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (!r.magic_ok()) throw FormatError("bad magic: not a DDFT feature table");
    const auto version = r.le_uint<std::uint32_t>("header");
    if (version != kTableVersion)
        throw FormatError("unsupported DDFT version " + std::to_string(version));
    const auto n = r.le_uint<std::uint64_t>("header");
    const auto q = r.le_uint<std::uint64_t>("header");
    const auto flags = r.le_uint<std::uint8_t>("header");
    if (flags & ~(kFlagLabels | kFlagLogits | kFlagHead))
        throw FormatError("unknown flag bits " + std::to_string(flags));
    std::uint32_t C = 0;
    if (flags & (kFlagLogits | kFlagHead)) C = r.le_uint<std::uint32_t>("header");

    FeatureTable t;
    t.outputs.features = r.f64_rows(n, q, "features");
    if (flags & kFlagLabels) {
        r.need(n, 4, "labels");
        Eigen::VectorXi labels(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < labels.size(); ++i) {
            const auto l = r.le_uint<std::uint32_t>("labels");
            if ((C != 0 && l >= C) || l > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
                throw DataError("label " + std::to_string(l) + " out of range at row " + std::to_string(i));
            labels(i) = static_cast<int>(l);
        }
        t.outputs.labels = std::move(labels);
    }
    if (flags & kFlagLogits) t.outputs.logits = r.f64_rows(n, C, "logits");
    if (flags & kFlagHead) {
        ClassifierHead head;
        head.W = r.f64_rows(C, q, "head W");
        head.b = r.f64_rows(C, 1, "head b");
        t.head = std::move(head);
    }
    if (r.remaining() != 0)
        throw CorruptFile(std::to_string(r.remaining()) + " trailing bytes after declared payload");
    t.outputs.validate();
    return t;
}

FeatureTable read_table(const std::filesystem::path& path) {
    return decode_table(slurp(path));
}

void write_table(const ModelOutputs& outputs, const std::optional<ClassifierHead>& head,
                 const std::filesystem::path& path) {
    const auto bytes = encode_table(outputs, head);
    spit(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view s, std::size_t line, std::size_t col) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (!s.empty() && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e)
        throw DataError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                        ": cannot parse '" + std::string(s) + "' as a number");
    if (!std::isfinite(v))
        throw DataError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                        ": non-finite value");
    return v;
}

/// Header and data rows of a CSV file, comments and blank lines skipped.
struct RawCsv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

RawCsv read_raw_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    RawCsv raw;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_commas(line);
        if (!have_header) {
            for (auto f : fields) raw.header.emplace_back(f);
            have_header = true;
            continue;
        }
        if (fields.size() != raw.header.size())
            throw FormatError("line " + std::to_string(lineno) + ": expected " +
                              std::to_string(raw.header.size()) + " fields, found " +
                              std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) row.push_back(parse_double(fields[c], lineno, c + 1));
        raw.rows.push_back(std::move(row));
    }
    if (!have_header) throw DataError("'" + path.string() + "' has no header row");
    if (raw.rows.empty()) throw DataError("'" + path.string() + "' is an empty table (header only)");
    return raw;
}

/// Index suffix of a column like "f12" with the given prefix, or -1.
long column_index(const std::string& name, char prefix) {
    if (name.size() < 2 || name[0] != prefix) return -1;
    long v = 0;
    auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), v);
    if (ec != std::errc() || ptr != name.data() + name.size() || v < 0) return -1;
    return v;
}

}  // namespace

ModelOutputs read_csv(const std::filesystem::path& path) {
    const RawCsv raw = read_raw_csv(path);
    std::map<long, std::size_t> fcols, lcols;
    std::optional<std::size_t> label_col;
    for (std::size_t c = 0; c < raw.header.size(); ++c) {
        const std::string& h = raw.header[c];
        if (h == "label") {
            label_col = c;
        } else if (long k = column_index(h, 'f'); k >= 0) {
            fcols[k] = c;
        } else if (long k2 = column_index(h, 'l'); k2 >= 0) {
            lcols[k2] = c;
        } else {
            throw FormatError("line 1: unknown column '" + h + "'");
        }
    }
    auto contiguous = [](const std::map<long, std::size_t>& m) {
        return m.empty() || (m.begin()->first == 0 && m.rbegin()->first == static_cast<long>(m.size()) - 1);
    };
    if (fcols.empty()) throw FormatError("line 1: no feature columns f0..");
    if (!contiguous(fcols) || !contiguous(lcols))
        throw FormatError("line 1: feature/logit columns must be numbered 0..k-1 without gaps");

    const auto n = static_cast<Eigen::Index>(raw.rows.size());
    ModelOutputs out;
    out.features.resize(n, static_cast<Eigen::Index>(fcols.size()));
    if (!lcols.empty()) out.logits = Eigen::MatrixXd(n, static_cast<Eigen::Index>(lcols.size()));
    if (label_col) out.labels = Eigen::VectorXi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = raw.rows[static_cast<std::size_t>(i)];
        for (const auto& [k, c] : fcols) out.features(i, k) = row[c];
        for (const auto& [k, c] : lcols) (*out.logits)(i, k) = row[c];
        if (label_col) {
            const double l = row[*label_col];
            if (l != std::floor(l) || l < 0 || l > std::numeric_limits<int>::max())
                throw DataError("row " + std::to_string(i) + ": label must be a nonnegative integer");
            (*out.labels)(i) = static_cast<int>(l);
        }
    }
    out.validate();
    return out;
}

void write_csv(const ModelOutputs& outputs, const std::filesystem::path& path) {
    outputs.validate();
    std::ostringstream os;
    const Eigen::Index q = outputs.features.cols();
    const Eigen::Index C = outputs.logits ? outputs.logits->cols() : 0;
    std::string sep;
    for (Eigen::Index j = 0; j < q; ++j, sep = ",") os << sep << 'f' << j;
    if (outputs.labels) os << ",label";
    for (Eigen::Index j = 0; j < C; ++j) os << ",l" << j;
    os << '\n';
    for (Eigen::Index i = 0; i < outputs.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < q; ++j) os << (j ? "," : "") << format_double(outputs.features(i, j));
        if (outputs.labels) os << ',' << (*outputs.labels)(i);
        for (Eigen::Index j = 0; j < C; ++j) os << ',' << format_double((*outputs.logits)(i, j));
        os << '\n';
    }
    spit(path, os.str());
}

const std::vector<double>& NumericCsv::column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return columns[c];
    throw DataError("no column named '" + name + "'");
}

NumericCsv read_numeric_csv(const std::filesystem::path& path) {
    const RawCsv raw = read_raw_csv(path);
    NumericCsv out;
    out.header = raw.header;
    out.columns.assign(raw.header.size(), {});
    for (const auto& row : raw.rows)
        for (std::size_t c = 0; c < row.size(); ++c) out.columns[c].push_back(row[c]);
    return out;
}

}  // namespace ddlab
