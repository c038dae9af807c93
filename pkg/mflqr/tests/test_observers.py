from mflqr.observers import ObservableEvents, Observer, ObserverManagerMixin, SimulationObserver
from mflqr.riccati import solve_mean_field
from mflqr.simulation import Simulation
from mflqr.utils.testing import MfLqrTestCase, benchmark_spec


class ObserverForTests(SimulationObserver):
    def __init__(self):
        self.calls = []

    def on_added(self, observable):
        self.calls.append((ObservableEvents.added, observable))

    def on_simulation_started(self, simulation):
        self.calls.append((ObservableEvents.simulation_started, simulation))

    def on_batch_finished(self, simulation, first_run, batch):
        self.calls.append((ObservableEvents.batch_finished, first_run, len(batch)))

    def on_simulation_finished(self, simulation):
        self.calls.append((ObservableEvents.simulation_finished, simulation))


class Observable(ObserverManagerMixin):
    pass


class TestObserver(MfLqrTestCase):
    def test_allowed_events(self):
        self.assertEqual(Observer.__get_allowed_events__(), {ObservableEvents.added})
        self.assertEqual(
            SimulationObserver.__get_allowed_events__(),
            {
                ObservableEvents.added,
                ObservableEvents.simulation_started,
                ObservableEvents.batch_finished,
                ObservableEvents.simulation_finished,
            },
        )
        self.assertEqual(set(ObservableEvents._all), SimulationObserver.__get_allowed_events__())

    def test_unknown_event_is_discarded(self):
        observer = ObserverForTests()
        observer.notify("message_sent", 1, 2)
        Observer().notify(ObservableEvents.batch_finished, None, 0, [])
        self.assertEqual(observer.calls, [])

    def test_manager(self):
        observable = Observable()
        observer = ObserverForTests()
        observable.add_observers(observer, observer)
        self.assertEqual(observable.observers, [observer])
        self.assertEqual(observer.calls, [(ObservableEvents.added, observable)] * 2)

        observable.notify_observers(ObservableEvents.simulation_finished, observable)
        self.assertEqual(observer.calls[-1], (ObservableEvents.simulation_finished, observable))

        observable.remove_observers(observer)
        self.assertEqual(observable.observers, [])
        observable.add_observers(observer)
        observable.clear_observers()
        observable.notify_observers(ObservableEvents.simulation_started, observable)
        self.assertEqual(len(observer.calls), 4)

    def test_simulation_event_order(self):
        spec = benchmark_spec(k=3, T=2)
        simulation = Simulation(spec, solve_mean_field(spec), [1.0, 2.0, 3.0], 5, base_seed=0, chunk_size=2)
        observer = ObserverForTests()
        simulation.add_observers(observer)
        simulation.run()
        events = [call[0] for call in observer.calls]
        self.assertEqual(
            events,
            [ObservableEvents.added, ObservableEvents.simulation_started]
            + [ObservableEvents.batch_finished] * 3
            + [ObservableEvents.simulation_finished],
        )
        self.assertEqual([call[1:] for call in observer.calls[2:5]], [(0, 2), (2, 2), (4, 1)])
