import inspect
import typing as t

D = t.TypeVar('D')  # dependency


class Container(object):
    """Creates singletons from their constructor annotations.

    Instances are registered under their class name. A registered class is built as soon
    as every annotated parameter without a default can be served from the registry."""

    def __init__(self):
        self.map_class: t.Dict[str, type] = {}
        self.map_instance: t.Dict[str, object] = {}

    def add_instance(self, dependency_instance: D, name: str = '') -> D:
        name = name or type(dependency_instance).__name__
        if name in self.map_instance:
            raise ValueError(f'name ({name}) already in map_instance')
        self.map_instance[name] = dependency_instance
        return dependency_instance

    def add_singleton(self, dependency: t.Type[D]):
        if not inspect.isclass(dependency):
            raise ValueError(f'add_singleton receive class only, but receive {dependency}')
        self.map_class[dependency.__name__] = dependency

    def get_singleton(self, dependency: t.Type[D]) -> t.Optional[D]:
        name = dependency.__name__ if inspect.isclass(dependency) else str(dependency)
        return self.map_instance.get(name, None)

    def missing(self, dependency: type) -> t.List[str]:
        """Annotations of dependency that cannot be served yet"""
        names = []
        for k, p in inspect.signature(dependency).parameters.items():
            served = inspect.isclass(p.annotation) and isinstance(self.map_instance.get(p.annotation.__name__),
                                                                 p.annotation)
            if not served and p.default is inspect.Parameter.empty:
                names.append(f'{k}: {getattr(p.annotation, "__name__", p.annotation)}')
        return names

    def inject(self, dependency: t.Type[D]) -> D:
        prepared_input = {}
        for k, p in inspect.signature(dependency).parameters.items():
            instance = self.map_instance.get(getattr(p.annotation, '__name__', ''))
            if inspect.isclass(p.annotation) and isinstance(instance, p.annotation):
                prepared_input[k] = instance
        return dependency(**prepared_input)

    def build(self, max_round=10) -> int:
        """Create every registered class; returns the number of rounds it took"""
        pending = {name: cls for name, cls in self.map_class.items() if name not in self.map_instance}
        rounds = 0
        while pending and rounds < max_round:
            rounds += 1
            for name, cls in list(pending.items()):
                if not self.missing(cls):
                    self.map_instance[name] = self.inject(cls)
                    del pending[name]
        if pending:
            detail = {name: self.missing(cls) for name, cls in pending.items()}
            raise ValueError(f'cannot create all instance: {detail}')
        return rounds
