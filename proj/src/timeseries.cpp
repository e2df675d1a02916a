#include "tes/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tes/errors.hpp"

namespace tes {

TimeSeries::TimeSeries(std::vector<std::string> channels)
    : names_(std::move(channels)), columns_(names_.size()) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (names_[i] == names_[k])
        throw InvalidInput("time series: duplicate channel '" + names_[i] +
                           "'");
}

void TimeSeries::append(double t, std::span<const double> values) {
  if (values.size() != names_.size())
    throw InvalidInput("time series: row has " +
                       std::to_string(values.size()) + " values, expected " +
                       std::to_string(names_.size()));
  if (!std::isfinite(t))
    throw InvalidInput("time series: non-finite timestamp");
  if (!time_.empty() && !(t > time_.back()))
    throw InvalidInput("time series: timestamp " + std::to_string(t) +
                       " at row " + std::to_string(time_.size()) +
                       " does not increase");
  time_.push_back(t);
  for (std::size_t c = 0; c < values.size(); ++c)
    columns_[c].push_back(values[c]);
}

void TimeSeries::reserve(std::size_t rows) {
  time_.reserve(rows);
  for (auto &c : columns_)
    c.reserve(rows);
}

bool TimeSeries::has(const std::string &name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t TimeSeries::channel_index(const std::string &name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    throw InvalidInput("time series: no channel '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

const std::vector<double> &TimeSeries::column(const std::string &name) const {
  return columns_[channel_index(name)];
}

void TimeSeries::add_channel(const std::string &name,
                             std::vector<double> values) {
  if (has(name))
    throw InvalidInput("time series: duplicate channel '" + name + "'");
  if (values.size() != time_.size())
    throw InvalidInput("time series: channel '" + name + "' has wrong length");
  names_.push_back(name);
  columns_.push_back(std::move(values));
}

TimeSeries TimeSeries::decimate(int factor) const {
  if (factor < 1)
    throw InvalidInput("decimate: factor must be >= 1");
  TimeSeries out(names_);
  out.reserve(size() / std::size_t(factor) + 1);
  std::vector<double> row(names_.size());
  for (std::size_t r = 0; r < size(); r += std::size_t(factor)) {
    for (std::size_t c = 0; c < names_.size(); ++c)
      row[c] = columns_[c][r];
    out.append(time_[r], row);
  }
  return out;
}

TimeSeries TimeSeries::select(const std::vector<std::string> &names) const {
  TimeSeries out(names);
  out.time_ = time_;
  for (std::size_t i = 0; i < names.size(); ++i)
    out.columns_[i] = column(names[i]);
  return out;
}

std::size_t TimeSeries::row_at_or_before(double t, double tol) const {
  if (time_.empty() || t + tol < time_.front())
    throw InvalidInput("time series: no sample at or before t = " +
                       std::to_string(t));
  auto it = std::upper_bound(time_.begin(), time_.end(), t + tol);
  return static_cast<std::size_t>(it - time_.begin()) - 1;
}

double TimeSeries::rate_jitter() const {
  if (size() < 3)
    return 0.0;
  const double mean = (time_.back() - time_.front()) / double(size() - 1);
  double worst = 0;
  for (std::size_t r = 1; r < size(); ++r)
    worst = std::max(worst, std::abs(time_[r] - time_[r - 1] - mean) / mean);
  return worst;
}

void TimeSeries::save_csv(const std::string &path,
                          const std::string &time_header) const {
  std::ofstream out(path);
  if (!out)
    throw InvalidInput("cannot write '" + path + "'");
  out << time_header;
  for (const auto &n : names_)
    out << ',' << n;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < size(); ++r) {
    out << time_[r];
    for (const auto &c : columns_)
      out << ',' << c[r];
    out << '\n';
  }
  if (!out)
    throw InvalidInput("write to '" + path + "' failed");
}

namespace {

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

TimeSeries TimeSeries::load_csv(const std::string &path,
                                const std::string &time_header) {
  std::ifstream in(path);
  if (!in)
    throw InvalidInput("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw InvalidInput(path + ": empty file");
  auto header = split(line);
  for (auto &h : header)
    h = trim(h);
  if (header.empty() || header.front() != time_header)
    throw InvalidInput(path + ": first column must be '" + time_header + "'");

  TimeSeries ts(std::vector<std::string>(header.begin() + 1, header.end()));
  std::vector<double> row(header.size() - 1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw InvalidInput(path + ": row " + std::to_string(line_no) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(header.size()));
    double t = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      double v = std::numeric_limits<double>::quiet_NaN();
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v))
        throw InvalidInput(path + ": row " + std::to_string(line_no) +
                           ", column '" + header[c] +
                           "': not a finite number ('" + cell + "')");
      if (c == 0)
        t = v;
      else
        row[c - 1] = v;
    }
    if (!ts.empty() && !(t > ts.time().back()))
      throw InvalidInput(path + ": row " + std::to_string(line_no) +
                         ": timestamp " + trim(cells[0]) +
                         " is not after the previous row");
    ts.append(t, row);
  }
  return ts;
}

} // namespace tes
