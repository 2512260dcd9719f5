from __future__ import annotations

import logging
from os import environ
from unittest.mock import patch

import pytest

from ..setting import (
    Setting,
    UnsetValue,
)
from ..settings import Settings
from ..source import (
    Defaults,
    Environment,
    InMemory,
    KeyValueFile,
    normalize_key,
)


def test_setting():
    item = Setting('4', coercer=int)
    assert item.value == 4
    assert item.pristine_value == '4'
    item.update(Setting(coercer=float))
    assert item.value == 4.0
    item.update(Setting('5'))
    assert item.value == 5.0
    assert Setting(UnsetValue).value is UnsetValue
    assert Setting('a') != 'a'
    assert Setting('a') == Setting('a').copy()
    assert repr(Setting(1)) == 'Setting(1, coercer=None)'


def test_settings_precedence():
    man = Settings(
        {
            'cli': InMemory(),
            'file': InMemory(),
            'defaults': Defaults(),
        }
    )
    assert list(man.sources.keys()) == ['cli', 'file', 'defaults']
    assert len(man) == 0
    with pytest.raises(KeyError):
        man['seed']

    man.sources['defaults']['seed'] = Setting(0, coercer=int)
    assert man['seed'].value == 0
    assert man.provenance('seed') == 'defaults'

    man.sources['file']['seed'] = Setting('12')
    assert man['seed'].value == 12
    assert man.provenance('seed') == 'file'

    man.sources['cli']['seed'] = Setting('13')
    assert man['seed'].value == 13
    assert man.provenance('seed') == 'cli'
    assert man.provenance('nothere') is None
    assert 'seed' in man
    assert man.resolve() == {'seed': 13}


def test_settings_resolve_reports_source():
    defaults = Defaults()
    defaults['epochs'] = Setting(3, coercer=int)
    env = InMemory()
    env['epochs'] = Setting('many')
    man = Settings({'env': env, 'defaults': defaults})
    with pytest.raises(ValueError, match=r"'many' for 'epochs' \(from env\)"):
        man.resolve(['epochs'])


def test_defaults_reset_logged(caplog):
    d = Defaults()
    d['lr'] = Setting(0.1)
    assert 'Resetting' not in caplog.text
    with caplog.at_level(logging.DEBUG):
        d['lr'] = Setting(0.2)
    assert 'Resetting' in caplog.text
    assert d.get('lr').value == 0.2
    assert d.get('nothere', 'x').value == 'x'
    del d['lr']
    assert 'lr' not in d
    assert str(d) == 'Defaults'


def test_environment_source():
    env = Environment(var_prefix='GEOCONV_')
    assert str(env) == 'Environment[GEOCONV_]'
    with patch.dict(environ, {'GEOCONV_SEED': '77', 'GEOCONV_BATCH_SIZE': '4'}):
        assert 'seed' in env
        assert env['seed'].value == '77'
        assert env['batch-size'].value == '4'
        assert {'seed', 'batch_size'} <= set(env.keys())
        man = Settings({'env': env, 'defaults': Defaults()})
        man.sources['defaults']['seed'] = Setting(0, coercer=int)
        assert man['seed'].value == 77
    with patch.dict(environ, {}, clear=True):
        assert 'seed' not in env
        with pytest.raises(KeyError):
            env['seed']
    with pytest.raises(ValueError, match='illegal'):
        env.get_varname_from_key('no=way')


def test_keyvalue_file(tmp_path):
    cfg = tmp_path / 'run.cfg'
    cfg.write_text(
        '# desk-scale run\n\nepochs = 40\nbatch-size=8\nradii=0.2,0.4,0.8\n',
        encoding='utf-8',
    )
    src = KeyValueFile(cfg)
    assert src['epochs'].value == '40'
    assert src['batch_size'].value == '8'
    assert src['radii'].value == '0.2,0.4,0.8'
    assert len(src) == 3
    assert str(src) == f'KeyValueFile[{cfg}]'


def test_keyvalue_file_malformed(tmp_path):
    cfg = tmp_path / 'bad.cfg'
    cfg.write_text('epochs 40\n', encoding='utf-8')
    with pytest.raises(ValueError, match='bad.cfg:1: expected key=value'):
        KeyValueFile(cfg)
    cfg.write_text('=40\n', encoding='utf-8')
    with pytest.raises(ValueError, match='empty key'):
        KeyValueFile(cfg)


def test_normalize_key():
    assert normalize_key(' Batch-Size ') == 'batch_size'
