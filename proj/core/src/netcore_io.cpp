#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "transnet/csv.hpp"
#include "transnet/netcore.hpp"

namespace transnet::netcore {

void write_graph_csv(const BipartiteGraph& g, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row({"seller_id", "buyer_id", "year", "value"});
  for (std::size_t t = 0; t < g.n_years(); ++t) {
    const Matrix& v = g.values(t);
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j)
        if (v(i, j) > 0.0)
          w.row({g.sellers().label(i), g.buyers().label(j), std::to_string(g.years()[t]), csv::format_double(v(i, j))});
  }
  w.close();
}

BipartiteGraph read_graph_csv(const std::filesystem::path& path) {
  csv::Reader r(path);
  if (!r.has_header()) throw InputError(path.string() + ": empty file");
  const std::size_t cs = r.column("seller_id"), cb = r.column("buyer_id"), cy = r.column("year"),
                    cv = r.column("value");
  struct Row {
    std::string s, b;
    int year;
    double v;
  };
  std::vector<Row> rows;
  std::set<std::string> sellers, buyers;
  std::set<int> years;
  while (r.next()) {
    long long year = 0;
    double v = 0.0;
    if (!r.ok() || !csv::parse_int(r.fields()[cy], year) || !csv::parse_double(r.fields()[cv], v) || v < 0.0)
      throw InputError(path.string() + ": malformed row at line " + std::to_string(r.line_number()));
    rows.push_back({r.fields()[cs], r.fields()[cb], static_cast<int>(year), v});
    sellers.insert(rows.back().s);
    buyers.insert(rows.back().b);
    years.insert(static_cast<int>(year));
  }
  Registry sr(Role::seller, {sellers.begin(), sellers.end()});
  Registry br(Role::buyer, {buyers.begin(), buyers.end()});
  std::vector<int> ys(years.begin(), years.end());
  std::vector<Matrix> values(ys.size(), Matrix(sr.size(), br.size()));
  for (const Row& row : rows) {
    const auto t = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), row.year) - ys.begin());
    values[t](sr.at(row.s).index, br.at(row.b).index) += row.v;
  }
  return BipartiteGraph(std::move(sr), std::move(br), std::move(ys), std::move(values));
}

namespace {

constexpr char kMagic[8] = {'T', 'N', 'G', 'R', 'A', 'P', 'H', '1'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw InputError("graph cache truncated");
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1u << 20)) throw InputError("graph cache corrupt: label too long");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw InputError("graph cache truncated");
  return s;
}

}  // namespace

void write_graph_cache(const BipartiteGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, g.n_sellers());
  put<std::uint64_t>(out, g.n_buyers());
  put<std::uint64_t>(out, g.n_years());
  for (const auto& l : g.sellers().labels()) put_string(out, l);
  for (const auto& l : g.buyers().labels()) put_string(out, l);
  for (int y : g.years()) put<std::int32_t>(out, y);
  for (std::size_t t = 0; t < g.n_years(); ++t) {
    const auto& data = g.values(t).storage();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

BipartiteGraph read_graph_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InputError(path.string() + ": not a graph cache");
  const auto ns = get<std::uint64_t>(in), nb = get<std::uint64_t>(in), nt = get<std::uint64_t>(in);
  if (ns > (1u << 24) || nb > (1u << 24) || nt > (1u << 16)) throw InputError(path.string() + ": implausible shape");
  Registry sr(Role::seller), br(Role::buyer);
  for (std::uint64_t i = 0; i < ns; ++i) sr.add(get_string(in));
  for (std::uint64_t j = 0; j < nb; ++j) br.add(get_string(in));
  std::vector<int> years(nt);
  for (auto& y : years) y = get<std::int32_t>(in);
  std::vector<Matrix> values;
  for (std::uint64_t t = 0; t < nt; ++t) {
    std::vector<double> data(ns * nb);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw InputError(path.string() + ": truncated values");
    values.emplace_back(ns, nb, std::move(data));
  }
  return BipartiteGraph(std::move(sr), std::move(br), std::move(years), std::move(values));
}

void write_proximity_csv(const Registry& sellers, const Matrix& distance, const std::filesystem::path& path) {
  if (distance.rows() != sellers.size() || distance.cols() != sellers.size())
    throw SizeError("write_proximity_csv: registry and matrix disagree");
  csv::Writer w(path);
  w.row({"seller_a", "seller_b", "km"});
  for (std::size_t a = 0; a < sellers.size(); ++a)
    for (std::size_t b = a + 1; b < sellers.size(); ++b)
      w.row({sellers.label(a), sellers.label(b), csv::format_double(distance(a, b))});
  w.close();
}

Matrix read_proximity_csv(const Registry& sellers, const std::filesystem::path& path) {
  csv::Reader r(path);
  if (!r.has_header()) throw InputError(path.string() + ": empty file");
  const std::size_t ca = r.column("seller_a"), cb = r.column("seller_b"), ck = r.column("km");
  const std::size_t n = sellers.size();
  Matrix d(n, n);
  Grid<std::uint8_t> seen(n, n);
  while (r.next()) {
    double km = 0.0;
    if (!r.ok() || !csv::parse_double(r.fields()[ck], km) || km < 0.0)
      throw InputError(path.string() + ": malformed row at line " + std::to_string(r.line_number()));
    const std::size_t a = sellers.at(r.fields()[ca]).index, b = sellers.at(r.fields()[cb]).index;
    if (a == b) throw InputError(path.string() + ": self-distance row");
    d(a, b) = d(b, a) = km;
    seen(a, b) = seen(b, a) = 1;
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (!seen(a, b)) throw InputError(path.string() + ": missing pair " + sellers.label(a) + "," + sellers.label(b));
  return d;
}

}  // namespace transnet::netcore
