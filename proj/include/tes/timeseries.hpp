#ifndef TES_TIMESERIES_HPP
#define TES_TIMESERIES_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tes {

/// Strictly increasing timestamps [s] with named, equally long channels.
class TimeSeries {
public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<std::string> channels);

  /// Appends one row; throws InvalidInput unless t exceeds the last stamp.
  void append(double t, std::span<const double> values);
  void reserve(std::size_t rows);

  std::size_t size() const { return time_.size(); }
  bool empty() const { return time_.empty(); }
  std::size_t channel_count() const { return names_.size(); }

  const std::vector<double> &time() const { return time_; }
  const std::vector<std::string> &channels() const { return names_; }

  bool has(const std::string &name) const;
  std::size_t channel_index(const std::string &name) const;
  const std::vector<double> &column(const std::string &name) const;
  const std::vector<double> &column(std::size_t index) const {
    return columns_.at(index);
  }
  double value(std::size_t row, std::size_t channel) const {
    return columns_[channel][row];
  }

  /// Adds a channel with one value per existing row.
  void add_channel(const std::string &name, std::vector<double> values);

  /// Every `factor`-th row, starting at row 0.
  TimeSeries decimate(int factor) const;

  /// Channels `names` in the order given.
  TimeSeries select(const std::vector<std::string> &names) const;

  /// Index of the last row with time <= t + tol (zero-order hold lookup).
  /// Throws InvalidInput when t precedes the first row.
  std::size_t row_at_or_before(double t, double tol = 0.0) const;

  /// Largest relative deviation of the sampling interval from its mean.
  double rate_jitter() const;

  /// CSV with `time_header` as the first column and 17 significant digits.
  void save_csv(const std::string &path,
                const std::string &time_header = "t_s") const;
  static TimeSeries load_csv(const std::string &path,
                             const std::string &time_header = "t_s");

private:
  std::vector<double> time_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

} // namespace tes

#endif // TES_TIMESERIES_HPP
