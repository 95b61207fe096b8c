#pragma once

#include <string>
#include <vector>

namespace pcflow::svg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Minimal fixed-size line/scatter plot. Coordinates are printed with fixed
// precision so output is reproducible.
class Plot {
 public:
  Plot(std::string title, std::string x_label, std::string y_label);

  void add_polyline(std::vector<Point> points, std::string colour);
  void add_scatter(std::vector<Point> points, std::string colour);
  void add_horizontal(double y, std::string colour, std::string label = {});

  std::string render() const;

 private:
  struct Series {
    std::vector<Point> points;
    std::string colour;
    bool line = true;
  };
  struct Rule {
    double y;
    std::string colour;
    std::string label;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  std::vector<Rule> rules_;
};

std::string escape(const std::string& text);

}  // namespace pcflow::svg
