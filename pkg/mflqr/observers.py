"""
Event hooks of the ensemble runner.

A :class:`~mflqr.simulation.Simulation` never keeps its trajectories. It hands each finished
chunk of runs to its observers, which keep whatever reduction they need.
"""

from typing import TYPE_CHECKING

from mflqr.logger import logger

if TYPE_CHECKING:
    from mflqr.simulation import RolloutBatch, Simulation


class ObservableEvents(str):
    """
    Names of the observable events.

    A plain namespace rather than an enum, so that subclasses can add events.
    """

    added = "added"
    simulation_started = "simulation_started"
    batch_finished = "batch_finished"
    simulation_finished = "simulation_finished"

    _all = (added, simulation_started, batch_finished, simulation_finished)


class Observer:
    """
    Receives events through :meth:`notify`, which calls ``on_<event>``.

    ``events`` lists what a class handles. The accepted set is the union of ``events``
    over the class hierarchy. Other events are dropped with a debug record.

    Concrete observers: :class:`~mflqr.metrics.EnergyMetricCollector` and the sample
    collectors of :mod:`mflqr.estimators`.
    """

    events = [ObservableEvents.added]

    @classmethod
    def __get_allowed_events__(cls) -> set[str]:
        return {
            event for klass in cls.__mro__ if issubclass(klass, Observer) for event in vars(klass).get("events", ())
        }

    def notify(self, event: str, *args, **kwargs):
        if event not in self.__get_allowed_events__():
            logger.debug("{} ignores event '{}'.", type(self).__name__, event)
            return
        getattr(self, f"on_{event.lower()}")(*args, **kwargs)

    def on_added(self, observable: "ObserverManagerMixin") -> None:
        """Hook run each time this observer is attached to ``observable``."""


class SimulationObserver(Observer):
    """
    Hooks of an ensemble run.

    ``on_batch_finished`` is called once per chunk, in increasing ``first_run`` order, also when
    chunks are simulated on several threads.
    """

    events = [
        ObservableEvents.simulation_started,
        ObservableEvents.batch_finished,
        ObservableEvents.simulation_finished,
    ]

    def on_simulation_started(self, simulation: "Simulation") -> None: ...

    def on_batch_finished(self, simulation: "Simulation", first_run: int, batch: "RolloutBatch") -> None: ...

    def on_simulation_finished(self, simulation: "Simulation") -> None: ...


class ObserverManagerMixin:
    """
    Keeps an ordered list of observers and broadcasts events to them.

    Classes using it must run ``super().__init__()``.
    """

    def __init__(self, *args, **kwargs):
        self.observers: list[Observer] = []
        super().__init__(*args, **kwargs)

    def add_observers(self, *observers: Observer):
        """Attach ``observers`` once each, in the given order, and send them ``added``."""
        for observer in observers:
            if observer not in self.observers:
                self.observers.append(observer)
            observer.notify(ObservableEvents.added, self)

    def remove_observers(self, *observers: Observer):
        self.observers = [observer for observer in self.observers if observer not in observers]

    def clear_observers(self):
        self.observers = []

    def notify_observers(self, event: str, *args, **kwargs):
        for observer in self.observers:
            observer.notify(event, *args, **kwargs)
