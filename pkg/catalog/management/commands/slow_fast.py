from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = 'Split the trajectory through a point as V_sl + V_f + V_p on the uniformly stable chart'
    command = 'slow_fast'
    kinds = ('singular',)

    def add_command_arguments(self, parser):
        parser.add_argument('--point', help='ambient point near the origin, comma separated')
        parser.add_argument('--delta', type=float, help='chart radius (default: the H3 chart radius)')
        parser.add_argument('--model', choices=('taylor', 'exact'), help='slow manifold lift (default taylor)')
        parser.add_argument('--horizon', type=float, help='tau horizon of the limit check (default 20)')
        parser.add_argument('--check-limit', action='store_true', default=None,
                            help='follow the trajectory to its limit on the curve of equilibria')
        parser.add_argument('--limit-tol', type=float, help='distance to the limit that counts as arrived')
        parser.add_argument('--grid-n', type=int, help='points of the chart trajectory grid')
