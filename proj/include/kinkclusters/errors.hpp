#pragma once

#include <stdexcept>
#include <string>

namespace kinkclusters {

// Base of every error raised by the library. Callers that only care about
// "something in the numerics failed" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedModel : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ToleranceFailure : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class IntegrationStall : public Error {
 public:
  IntegrationStall(const std::string& what, double achieved)
      : Error(what), achieved_window(achieved) {}
  double achieved_window;
};

class BlowUpDetected : public Error {
 public:
  BlowUpDetected(const std::string& what, double last_good)
      : Error(what), last_good_time(last_good) {}
  double last_good_time;
};

class FitDivergence : public Error {
 public:
  using Error::Error;
};

class SectorMismatch : public Error {
 public:
  using Error::Error;
};

class NoNearbyMultikink : public Error {
 public:
  using Error::Error;
};

class InadmissibleForcing : public Error {
 public:
  using Error::Error;
};

class StiffnessError : public Error {
 public:
  using Error::Error;
};

class CollisionEvent : public Error {
 public:
  CollisionEvent(const std::string& what, double t)
      : Error(what), time(t) {}
  double time;
};

class BoostSelectionError : public Error {
 public:
  using Error::Error;
};

class MapEvaluationError : public Error {
 public:
  using Error::Error;
};

class SearchBudgetError : public Error {
 public:
  using Error::Error;
};

class MirandaSignFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kinkclusters
